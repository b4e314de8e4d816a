import json
import logging
import os
import platform
from importlib import metadata
from typing import Any, Dict, List

from jsonschema import Draft7Validator

from evaluation.core.evaluator import ExperimentResult
from evaluation.core.schema import SUMMARY_SCHEMA
from rigidlab import __version__

logger = logging.getLogger(__name__)

_PACKAGES = ("numpy", "scipy", "sympy", "pandas", "jsonschema")


def package_versions() -> Dict[str, str]:
    versions = {"rigidlab": __version__, "python": platform.python_version()}
    for name in _PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def _dump(data: Dict[str, Any]) -> str:
    text = json.dumps(
        data, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False
    )
    return text + "\n"


class ReportGenerator:
    def __init__(self, result: ExperimentResult, experiment: Dict[str, Any], output_dir: str):
        """
        Initialize the report generator

        Args:
            result: assembled experiment result
            experiment: the validated configuration, echoed into the summary
            output_dir: directory for the report files
        """
        self.result = result
        self.experiment = experiment
        self.output_dir = output_dir

    def generate(self) -> List[str]:
        """
        Write ``<name>.csv``, ``<name>.summary.json`` and ``<name>.timing.json``

        Returns:
            List[str]: paths of the written files
        """
        os.makedirs(self.output_dir, exist_ok=True)
        base = os.path.join(self.output_dir, self.result.name)
        paths = [f"{base}.csv", f"{base}.summary.json", f"{base}.timing.json"]

        csv_text = self.result.frame.to_csv(index=False, float_format="%.17g", na_rep="")
        summary = self.summary()
        timing = {
            "name": self.result.name,
            "wall_time": self.result.duration,
            "items": self.result.item_durations,
        }
        try:
            _write_atomic(paths[0], csv_text)
            _write_atomic(paths[1], _dump(summary))
            _write_atomic(paths[2], _dump(timing))
        except Exception as e:
            logger.error(f"Error saving report: {e}")
            raise
        logger.info(f"Report generated successfully: {paths[1]} ({summary['status']})")
        return paths

    def summary(self) -> Dict[str, Any]:
        """The run summary; validated against the published summary schema."""
        summary = {
            "name": self.result.name,
            "kind": self.result.kind,
            "status": "pass" if self.result.passed else "fail",
            "seed": self.experiment.get("seed"),
            "inputs": self.experiment,
            "versions": package_versions(),
            "rows": int(len(self.result.frame)),
            "artifacts": list(self.result.artifacts),
            "assertions": [a.as_dict() for a in self.result.assertions],
        }
        errors = [e.message for e in Draft7Validator(SUMMARY_SCHEMA).iter_errors(summary)]
        if errors:
            raise ValueError(f"summary does not match its schema: {'; '.join(errors)}")
        return summary
