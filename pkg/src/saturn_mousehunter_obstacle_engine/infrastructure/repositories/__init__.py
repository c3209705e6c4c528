"""Infrastructure Repositories"""

from .ensemble_dump_repo import EnsembleDumpRepo
from .result_csv_repo import ResultCsvRepo, emit_csv, write_csv

__all__ = ["EnsembleDumpRepo", "ResultCsvRepo", "emit_csv", "write_csv"]
