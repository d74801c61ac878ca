from emoformer.cli.main import main
