import sys

from app.cli.commands import dispatch


if __name__ == "__main__":
    sys.exit(dispatch())
