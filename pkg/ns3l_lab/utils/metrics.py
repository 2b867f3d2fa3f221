"""Per-step training metrics kept in memory and exported as ``step,term,value`` CSV."""
import csv
import io
import logging
from dataclasses import dataclass, field
from typing import List, Mapping, Tuple

from ns3l_lab.utils.config_io import write_text_atomic

LOG = logging.getLogger(__name__)

HEADER = ('step', 'term', 'value')


@dataclass
class MetricsLog:
    """
    Ordered ``(step, term, value)`` rows, one per logged term per evaluation.

    Rows keep insertion order, so the CSV of a deterministic run is byte-identical
    across replays.
    """

    rows: List[Tuple[int, str, float]] = field(default_factory=list)

    def add(self, step: int, terms: Mapping[str, float]) -> None:
        """Appends one row per entry of ``terms``, in mapping order."""
        for term, value in terms.items():
            self.rows.append((int(step), term, float(value)))

    def values(self, term: str) -> List[float]:
        """Logged values of ``term`` in step order."""
        return [value for _, name, value in self.rows if name == term]

    def steps(self, term: str) -> List[int]:
        return [step for step, name, _ in self.rows if name == term]

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(HEADER)
        for step, term, value in self.rows:
            writer.writerow((step, term, repr(value)))
        return buffer.getvalue()

    def write_csv(self, path: str) -> None:
        """
        Writes ``step,term,value`` rows atomically.

        Args:
            path: Destination file; parent directories are created.
        """
        write_text_atomic(path, self.to_csv_text())
        LOG.info('Wrote %d metric rows to %s', len(self.rows), path)


def read_metrics_csv(path: str) -> MetricsLog:
    """Parses a file written by ``MetricsLog.write_csv``; the header row is skipped."""
    log = MetricsLog()
    with open(path, newline='', encoding='utf-8') as handle:
        reader = csv.reader(handle)
        next(reader, None)
        for step, term, value in reader:
            log.rows.append((int(step), term, float(value)))
    return log
