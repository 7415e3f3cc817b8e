"""Entry point for the command line"""

import sys

from app import App


def main(argv: list[str]|None=None) -> int:
    """Run one command and return its exit status"""

    return App().run(argv)


if __name__ == "__main__":
    sys.exit(main())
