"""
Core App - Plotting

Headless matplotlib figures for run artifacts.
"""

from pathlib import Path

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402


def save_curve(xs, ys, path, xlabel, ylabel, title=None):
    """Line plot with markers, written as PNG."""
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        ax.plot(xs, ys, marker='o')
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_ylim(0.0, 1.0)
        ax.grid(True, alpha=0.3)
        if title:
            ax.set_title(title)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=100, bbox_inches='tight')
    finally:
        plt.close(fig)
    return path


def save_histogram(counts, edges, path, xlabel, title=None):
    """Bar histogram from precomputed counts and bin edges."""
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        ax.bar(edges[:-1], counts, width=edges[1:] - edges[:-1], align='edge')
        ax.set_xlabel(xlabel)
        ax.set_ylabel('count')
        if title:
            ax.set_title(title)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=100, bbox_inches='tight')
    finally:
        plt.close(fig)
    return path
