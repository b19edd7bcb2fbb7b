from monoflow.tools.cli.main import cli


cli(prog_name="monoflow")
