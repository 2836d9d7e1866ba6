from __future__ import annotations
import logging, sys

def setup_logging(level: int | str = logging.INFO) -> None:
    fmt = "[%(levelname)s] %(name)s | %(message)s"
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(fmt))
    # force=True : la CLI peut être rappelée plusieurs fois dans un même process (tests)
    logging.basicConfig(level=level, handlers=[handler], force=True)
