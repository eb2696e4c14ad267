"""CSV reading shared by the file loaders."""
import csv


def data_rows(path):
    """Yield ``(line_number, row)`` for non-blank, non-comment CSV lines."""
    with open(path, newline="") as fh:
        lines = [(n, line) for n, line in enumerate(fh, start=1) if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty file")
    reader = csv.reader(line for _, line in lines)
    for (n, _), row in zip(lines, reader):
        yield n, [c.strip() for c in row]
