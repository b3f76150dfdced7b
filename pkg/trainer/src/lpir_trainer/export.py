"""Hand-off files for the scheme-analysis toolkit.

Queries are exported in the audit CSV format (header ``m,q_1,...,q_dim``,
one row per sample, 1-based request index) and achieved operating points
in the frontier CSV row format
(``rate,distortion,leakage,leakage_kind,scheme,label``).
"""

from __future__ import annotations

import numpy as np


def export_queries(scheme, samples_per_file, seed, path,
                   constant_query=False):
    """Monte-Carlo queries from the trained query network, as audit CSV.

    ``constant_query`` ablates the network: the noise input is zeroed and
    the query collapsed to the all-requests mean, so the export carries no
    information about the request.
    """
    rng = np.random.default_rng(seed)
    m = scheme.num_files
    requested = np.repeat(np.arange(1, m + 1), samples_per_file)
    rng.shuffle(requested)
    queries = scheme.generate_queries(requested, rng)
    if constant_query:
        queries = np.broadcast_to(
            queries.mean(axis=0), queries.shape
        ).copy()
    with open(path, "w", encoding="utf-8") as f:
        cols = ",".join(f"q_{i + 1}" for i in range(queries.shape[1]))
        f.write(f"m,{cols}\n")
        for label, row in zip(requested, queries):
            f.write(f"{label}," + ",".join(f"{v:.10g}" for v in row) + "\n")
    return path


def scheme_point_row(scheme):
    """One frontier-CSV row for the final evaluated operating point."""
    return (
        f"{scheme.rate:.9g},{scheme.final_distortion:.9g},"
        f"{scheme.final_accuracy:.9g},map_accuracy,learned,"
        f"eta={scheme.history['eta'][-1]:.4g}"
    )


def export_scheme_point(scheme, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("rate,distortion,leakage,leakage_kind,scheme,label\n")
        f.write(scheme_point_row(scheme) + "\n")
    return path
