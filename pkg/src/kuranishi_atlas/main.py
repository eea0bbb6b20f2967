import logging
import sys

from kuranishi_atlas.cli import run
from kuranishi_atlas.config import LOG_LEVEL


# Set up logging for the application
logging.basicConfig(level=LOG_LEVEL)
logger = logging.getLogger(__name__)


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    # Entry point for the application
    main()
