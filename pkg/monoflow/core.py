"""
 * Copyright(c) 2026 monoflow contributors
 *
 * This program and the accompanying materials are made available under the
 * terms of the Eclipse Public License v. 2.0 which is available at
 * http://www.eclipse.org/legal/epl-2.0, or the Eclipse Distribution License
 * v. 1.0 which is available at
 * http://www.eclipse.org/org/documents/edl-v10.php.
 *
 * SPDX-License-Identifier: EPL-2.0 OR BSD-3-Clause
"""

from typing import Any, Dict


class FlowNetworkException(Exception):
    """This exception is raised when an operation on a flow network cannot be carried out.
    Print the exception directly or convert it to string for a detailed description.

    Attributes
    ----------
    code: int
        One of the ``FLOW_*`` constants that indicates the type of error.
    msg: str
        A human readable description of where the error occurred.
    details: dict
        Structured context (offending link or node id, time, ...), emitted verbatim in error reports.
    """

    FLOW_OK = 0  # Success
    FLOW_ERROR = -1  # Non specific error
    FLOW_BAD_PARAMETER = -3  # Bad parameter value
    FLOW_PRECONDITION_NOT_MET = -4  # Precondition for operation not met
    FLOW_PARSE_ERROR = -20  # Scenario or option could not be parsed
    FLOW_VALIDATION_ERROR = -21  # Network or scenario violates a model invariant
    FLOW_DOMAIN_ERROR = -22  # Density outside the domain of the routing policy
    FLOW_NUMERICAL_ABORT = -23  # Integration or arithmetic aborted
    FLOW_PROPERTY_FAILURE = -24  # A property suite reported failures

    error_message_mapping = {
        FLOW_OK: ("FLOW_OK", "Success"),
        FLOW_ERROR: ("FLOW_ERROR", "Non specific error"),
        FLOW_BAD_PARAMETER: ("FLOW_BAD_PARAMETER", "Bad parameter value"),
        FLOW_PRECONDITION_NOT_MET: (
            "FLOW_PRECONDITION_NOT_MET",
            "Precondition for operation not met",
        ),
        FLOW_PARSE_ERROR: ("FLOW_PARSE_ERROR", "Input could not be parsed"),
        FLOW_VALIDATION_ERROR: (
            "FLOW_VALIDATION_ERROR",
            "Input violates a flow network invariant",
        ),
        FLOW_DOMAIN_ERROR: (
            "FLOW_DOMAIN_ERROR",
            "Densities outside the domain of the routing policy",
        ),
        FLOW_NUMERICAL_ABORT: (
            "FLOW_NUMERICAL_ABORT",
            "Numerical computation aborted",
        ),
        FLOW_PROPERTY_FAILURE: (
            "FLOW_PROPERTY_FAILURE",
            "Property checks reported failures",
        ),
    }

    exit_code_mapping = {
        FLOW_OK: 0,
        FLOW_PARSE_ERROR: 2,
        FLOW_BAD_PARAMETER: 2,
        FLOW_VALIDATION_ERROR: 3,
        FLOW_PRECONDITION_NOT_MET: 3,
        FLOW_DOMAIN_ERROR: 4,
        FLOW_NUMERICAL_ABORT: 4,
        FLOW_PROPERTY_FAILURE: 5,
    }

    def __init__(self, code: int, msg: str = None, **details: Any) -> None:
        """Initialize a FlowNetworkException. Code should be one of the FLOW_* constants."""
        self.code = code
        self.msg = msg or ""
        self.details: Dict[str, Any] = details
        super().__init__(self.msg)

    @property
    def name(self) -> str:
        if self.code in self.error_message_mapping:
            return self.error_message_mapping[self.code][0]
        return "FlowNetworkException"

    @property
    def exit_code(self) -> int:
        """Process exit code the command line tools use for this error."""
        return self.exit_code_mapping.get(self.code, 1)

    def asdict(self) -> Dict[str, Any]:
        return {
            "error": {
                "code": self.code,
                "name": self.name,
                "message": str(self),
                "details": self.details,
            }
        }

    def __str__(self) -> str:
        if self.code in self.error_message_mapping:
            msg = self.error_message_mapping[self.code]
            return f"[{msg[0]}] {msg[1]}. {self.msg}"
        return f"[FlowNetworkException] Got an unexpected error code '{self.code}'. {self.msg}"

    def __repr__(self) -> str:
        return str(self)


class FlowNetworkWarning(UserWarning):
    """Non-fatal anomaly: a policy used outside its intended setting, an inconclusive classification, ..."""
    pass
