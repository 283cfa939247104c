"""Structural diff over parsed JSON trees, used by ablation containment checks."""

from __future__ import annotations


def diff_paths(left, right, prefix: str = "$") -> list[str]:
    """Paths where two parsed JSON documents differ (leaf-level)."""
    if type(left) is not type(right):
        return [prefix]
    if isinstance(left, dict):
        paths = []
        for key in sorted(set(left) | set(right)):
            if key not in left or key not in right:
                paths.append(f"{prefix}.{key}")
            else:
                paths.extend(diff_paths(left[key], right[key], f"{prefix}.{key}"))
        return paths
    if isinstance(left, list):
        if len(left) != len(right):
            return [f"{prefix}[len {len(left)} != {len(right)}]"]
        paths = []
        for i, (a, b) in enumerate(zip(left, right)):
            paths.extend(diff_paths(a, b, f"{prefix}[{i}]"))
        return paths
    return [] if left == right else [prefix]
