import os


def scrub_diagnostics(raw: bytes, workdir: str, limit: int) -> str:
    """
    Makes compiler diagnostics comparable across runs.
    Replaces the per-compile temp directory with `<workdir>` and keeps the first `limit` bytes.
    """
    text = raw.decode("utf-8", errors="replace")
    for path in sorted({os.path.realpath(workdir), workdir}, key=len, reverse=True):
        text = text.replace(path, "<workdir>")
    return text.encode("utf-8")[:limit].decode("utf-8", errors="ignore")
