// SPDX-License-Identifier: MIT OR Apache-2.0

//! Optional figure rendering through the host's Python and matplotlib.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use crate::error::{Error, Result};

const SCRIPT: &str = r##"
import csv, os, sys
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

out = sys.argv[1]

def rows(name):
    path = os.path.join(out, name + ".csv")
    if not os.path.exists(path):
        return []
    with open(path, newline="") as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))

written = []

gdv = rows("gdv_curve")
if gdv:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([int(r["layer"]) for r in gdv], [float(r["gdv"]) for r in gdv], marker="o")
    ax.set_xlabel("layer"); ax.set_ylabel("GDV"); ax.set_title("CLS cluster separation")
    fig.tight_layout(); p = os.path.join(out, "gdv_curve.png"); fig.savefig(p, dpi=120); written.append(p)

probe = rows("probe_curves")
if probe:
    fig, ax = plt.subplots(figsize=(6, 4))
    for role in sorted({r["role"] for r in probe}):
        pts = sorted((int(r["layer"]), float(r["mean_accuracy"])) for r in probe if r["role"] == role)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=role)
    ax.axhline(float(probe[0]["chance"]), color="grey", linestyle="--", label="chance")
    ax.set_xlabel("layer"); ax.set_ylabel("accuracy"); ax.set_ylim(0, 1.05); ax.legend()
    fig.tight_layout(); p = os.path.join(out, "probe_curves.png"); fig.savefig(p, dpi=120); written.append(p)

fdr = [r for r in rows("fdr_heatmap") if r["mean_fdr"] != ""]
if fdr:
    roles = sorted({r["role"] for r in fdr})
    layers = sorted({int(r["layer"]) for r in fdr})
    grid = [[0.0] * len(layers) for _ in roles]
    counts = [[0] * len(layers) for _ in roles]
    for r in fdr:
        i, j = roles.index(r["role"]), layers.index(int(r["layer"]))
        grid[i][j] += float(r["mean_fdr"]); counts[i][j] += 1
    grid = [[g / c if c else 0.0 for g, c in zip(gr, cr)] for gr, cr in zip(grid, counts)]
    fig, ax = plt.subplots(figsize=(7, 3))
    im = ax.imshow(grid, aspect="auto", cmap="viridis")
    ax.set_yticks(range(len(roles)), roles); ax.set_xticks(range(len(layers)), layers)
    ax.set_xlabel("layer"); fig.colorbar(im, ax=ax, label="mean FDR over heads")
    fig.tight_layout(); p = os.path.join(out, "fdr_heatmap.png"); fig.savefig(p, dpi=120); written.append(p)

points = rows("projection_points")
for method in sorted({r["method"] for r in points}):
    sel = [r for r in points if r["method"] == method]
    layers = sorted({int(r["layer"]) for r in sel})
    cols = min(4, len(layers)); nrows = (len(layers) + cols - 1) // cols
    fig, axes = plt.subplots(nrows, cols, figsize=(3 * cols, 3 * nrows), squeeze=False)
    labels = sorted({r["label"] for r in sel})
    for k, layer in enumerate(layers):
        ax = axes[k // cols][k % cols]
        for lab in labels:
            pts = [r for r in sel if int(r["layer"]) == layer and r["label"] == lab]
            ax.scatter([float(r["x"]) for r in pts], [float(r["y"]) for r in pts], s=8, label=lab)
        ax.set_title("layer %d" % layer); ax.set_xticks([]); ax.set_yticks([])
    for k in range(len(layers), nrows * cols):
        axes[k // cols][k % cols].axis("off")
    axes[0][0].legend(fontsize=6)
    fig.tight_layout(); p = os.path.join(out, "projection_%s.png" % method); fig.savefig(p, dpi=120); written.append(p)

print("\n".join(written))
"##;

/// Render PNG figures from the CSV plot data in `dir` using `python3` and
/// matplotlib. Returns the written image paths.
pub fn render_figures(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut child = Command::new("python3")
        .arg("-")
        .arg(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::io("python3", e))?;
    child
        .stdin
        .take()
        .expect("stdin is piped")
        .write_all(SCRIPT.as_bytes())
        .map_err(|e| Error::io("python3", e))?;
    let output = child.wait_with_output().map_err(|e| Error::io("python3", e))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(Error::io(
            "python3",
            std::io::Error::other(format!("figure rendering failed: {}", stderr.trim())),
        ));
    }
    Ok(String::from_utf8_lossy(&output.stdout)
        .lines()
        .filter(|l| !l.is_empty())
        .map(PathBuf::from)
        .collect())
}
