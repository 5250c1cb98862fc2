import logging
import logging.config
from pathlib import Path

import yaml


def setup_logging(path: str | Path = "logging_config.yaml") -> None:
    """Configure logging from a YAML dictConfig file.

    Falls back to `logging.basicConfig` at WARNING when the file is missing,
    so the library stays quiet when used without the CLI.
    """
    path = Path(path)
    if not path.is_file():
        logging.basicConfig(level=logging.WARNING)
        return

    with open(path) as f:
        config = yaml.safe_load(f)
        logging.config.dictConfig(config)
