"""
VERIFICATION & PROVENANCE
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
SHA-256 digests tying reports to the dataset files they were computed
from, and tamper checks on saved reports.
"""

import copy
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np

from . import __version__

# fields that legitimately differ between otherwise identical runs
VOLATILE_FIELDS = ('timing', 'wall_clock', 'verification')


def sanitize_for_json(obj):
    """
    Recursively sanitize objects for JSON serialization.

    Converts numpy arrays, numpy types, enums, tuples and paths to
    JSON-compatible types.
    """
    if isinstance(obj, dict):
        return {str(k): sanitize_for_json(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [sanitize_for_json(item) for item in obj]
    elif isinstance(obj, np.ndarray):
        return sanitize_for_json(obj.tolist())
    elif isinstance(obj, np.bool_):
        return bool(obj)
    elif isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    elif hasattr(obj, 'value') and isinstance(getattr(obj, 'value'), (str, int)):
        return obj.value
    elif isinstance(obj, (int, float, str, bool, type(None))):
        return obj
    else:
        return str(obj)


def file_digest(path) -> str:
    """SHA-256 of a file's bytes."""
    sha256_hash = hashlib.sha256()
    with open(path, "rb") as f:
        for byte_block in iter(lambda: f.read(65536), b""):
            sha256_hash.update(byte_block)
    return sha256_hash.hexdigest()


def body_digest(report: dict) -> str:
    """SHA-256 of the canonical JSON of a report without its volatile fields."""
    body = {k: v for k, v in report.items() if k not in VOLATILE_FIELDS}
    canonical = json.dumps(sanitize_for_json(body), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


class OutputVerifier:
    """Adds and checks provenance blocks on report dictionaries."""

    def __init__(self):
        self.hash_algorithm = 'sha256'

    def sign_report(self, report: dict, data_files: Optional[Iterable] = None) -> dict:
        """
        Add a verification block to ``report`` (in place) and return it.

        Args:
            report: Report dictionary
            data_files: Dataset files the report was computed from
        """
        files: Dict[str, dict] = {}
        for path in data_files or []:
            path = Path(path)
            files[path.name] = {
                'path': str(path.absolute()),
                'sha256': file_digest(path),
                'size_bytes': path.stat().st_size,
            }

        report['verification'] = {
            'timestamp_utc': datetime.now(timezone.utc).isoformat(),
            'algorithm': self.hash_algorithm,
            'data_files': files,
            'report_hash_sha256': body_digest(report),
            'package_version': __version__,
        }
        return report

    def verify_report(self, report_path) -> dict:
        """
        Verify integrity of a saved report against itself and its data files.

        Args:
            report_path: Path to JSON report file

        Returns:
            dict: Verification results
        """
        with open(report_path, 'r') as f:
            report = json.load(f)

        if 'verification' not in report:
            return {'valid': False, 'error': 'Report does not contain verification metadata'}

        verification = report['verification']
        for name, info in verification.get('data_files', {}).items():
            if not Path(info['path']).exists():
                return {'valid': False, 'error': f'Data file not found: {info["path"]}'}
            actual = file_digest(info['path'])
            if actual != info['sha256']:
                return {
                    'valid': False,
                    'error': f'Data file {name} has been modified since the run',
                    'expected_hash': info['sha256'],
                    'actual_hash': actual,
                }

        current = body_digest(copy.deepcopy(report))
        if current != verification['report_hash_sha256']:
            return {
                'valid': False,
                'error': 'Report has been tampered with',
                'expected_hash': verification['report_hash_sha256'],
                'actual_hash': current,
            }

        return {
            'valid': True,
            'timestamp': verification['timestamp_utc'],
            'data_files': sorted(verification.get('data_files', {})),
        }
