"""Reference past states and measurement suites used by tests and the CLI.

The VAA pair is the two-qubit past state for which the outcomes of all three
Pauli measurements on the first qubit are certain.  Its prepared state is kept
as the unnormalized ``|00> + |11>``; probabilities do not depend on that scale,
and with it the reduced past state equals ``|e><e|^Gamma`` with
``lambda_min = -1/4``.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .operators import operator_from_json, operator_to_json
from .retrodiction import PastState, Povm
from .witness import MeasurementSuite, mub_suite, mub_unitaries, noisy_pauli_povm, pauli_suite

__all__ = [
    "phi_plus",
    "vaa_vectors",
    "vaa_pair",
    "vaa_xi_expected",
    "phi_plus_pair",
    "swap",
    "fixture_povms",
    "pauli_suite",
    "mub_suite",
    "mub_unitaries",
    "noisy_pauli_povm",
    "write_fixture_files",
    "load_fixture",
]


def phi_plus(d: int, normalized: bool = False) -> np.ndarray:
    v = np.eye(d, dtype=complex).ravel()
    return v / np.sqrt(d) if normalized else v


def vaa_vectors() -> tuple[np.ndarray, np.ndarray]:
    psi = phi_plus(2)
    w = np.exp(1j * np.pi / 4)
    # basis order |00>, |01>, |10>, |11>
    e = np.array([1 / np.sqrt(2), np.conj(w) / 2, w / 2, 0], dtype=complex)
    return psi, e


def vaa_pair() -> PastState:
    psi, e = vaa_vectors()
    return PastState.from_vectors(psi, e, (2, 2))


def vaa_xi_expected() -> np.ndarray:
    """``(|10><10| + |01><01|)/4 + |zeta><00| + |00><zeta|``."""
    zeta = np.array([1 / 4, (1 + 1j) / 4, (1 + 1j) / 4, 1j / 4])
    ket00 = np.array([1, 0, 0, 0], dtype=complex)
    m = 0.25 * np.diag([0, 1, 1, 0]).astype(complex)
    return m + np.outer(zeta, ket00) + np.outer(ket00, zeta.conj())


def phi_plus_pair(d: int = 2) -> PastState:
    v = phi_plus(d)
    return PastState.from_vectors(v, v, (d, d))


def swap(d: int) -> np.ndarray:
    m = np.zeros((d * d, d * d))
    for j in range(d):
        for k in range(d):
            m[j * d + k, k * d + j] = 1.0
    return m


def fixture_povms() -> dict[int, list[Povm]]:
    """All shipped POVMs keyed by the dimension they act on."""
    return {
        2: list(pauli_suite().povms) + list(noisy_pauli_povm(0.7, 0.3).povms),
        4: list(mub_suite().povms),
    }


# -- JSON files ----------------------------------------------------------------

def _suite_json(suite: MeasurementSuite) -> dict:
    return {"label": suite.label, "povms": [p.to_json() for p in suite.povms]}


def fixture_payloads() -> dict[str, dict]:
    vaa = vaa_pair()
    pp = phi_plus_pair(2)
    return {
        "vaa_rho.json": operator_to_json(vaa.rho),
        "vaa_effect.json": operator_to_json(vaa.effect),
        "phi_plus_rho.json": operator_to_json(pp.rho),
        "phi_plus_effect.json": operator_to_json(pp.effect),
        "pauli_povms.json": _suite_json(pauli_suite()),
        "mub_povms.json": _suite_json(mub_suite()),
        "noisy_pauli_povms.json": _suite_json(noisy_pauli_povm(0.7, 0.3)),
    }


def write_fixture_files(directory) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, payload in fixture_payloads().items():
        p = out / name
        p.write_text(json.dumps(payload, indent=1) + "\n")
        paths.append(p)
    return paths


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("retrodict") / "data" / name))


def load_fixture(name: str):
    """Load a shipped fixture: an operator or a list of POVMs."""
    payload = json.loads(fixture_path(name).read_text())
    if "povms" in payload:
        return [Povm.from_json(p, where=f"{name}.povms[{i}]") for i, p in enumerate(payload["povms"])]
    return operator_from_json(payload, where=name)

