import sys

from app.modules.cli import main


if __name__ == "__main__":
    sys.exit(main())
