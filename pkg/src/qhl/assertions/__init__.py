"""Assertion semantics: satisfaction, probabilities and entailment."""
from .entail import EntailProof, Unknown, entails, equivalent, normalize
from .sat import (NotDecisive, NotProven, QView, Refuted, Satisfied, UnsupportedFragment, classical_truth,
                  is_convex, probability_of, qexpr_vector, sat_state, satisfies, verify_witness)
from .transport import transport

__all__ = [
    "EntailProof", "Unknown", "entails", "equivalent", "normalize", "NotDecisive", "NotProven", "QView",
    "Refuted", "Satisfied", "UnsupportedFragment", "classical_truth", "is_convex", "probability_of",
    "qexpr_vector", "sat_state", "satisfies", "verify_witness", "transport",
]
