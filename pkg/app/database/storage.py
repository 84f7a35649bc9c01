import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterator, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@contextmanager
def atomic_write(path: PathLike, mode: str = "w") -> Iterator[IO]:
    """Write to a temp file next to `path` and rename it into place on success.

    On any exception the temp file is removed and `path` is left untouched.
    """
    path = Path(path)
    text = "b" not in mode
    tmp = tempfile.NamedTemporaryFile(mode=mode, dir=path.parent, prefix=f".{path.name}.",
                                      suffix=".tmp", delete=False,
                                      **({"encoding": "utf-8", "newline": ""} if text else {}))
    try:
        with tmp:
            yield tmp
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp.name, path)
    except BaseException:
        if os.path.exists(tmp.name):
            os.remove(tmp.name)
        raise
    logger.debug("wrote %s", path)
