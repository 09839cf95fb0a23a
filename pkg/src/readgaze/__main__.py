"""Allow ``python -m readgaze`` to behave like the installed executable."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
