"""
Knowledge graph store.

Public API:
    - load_kg(), save_kg(), default_kg()
    - symbolic_baseline(), symbolic_predict()
"""

from app.knowledge.store import KG_VERSION, default_kg, load_kg, save_kg, symbolic_baseline, symbolic_predict

__all__ = ["KG_VERSION", "default_kg", "load_kg", "save_kg", "symbolic_baseline", "symbolic_predict"]
