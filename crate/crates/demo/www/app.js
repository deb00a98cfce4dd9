// SPDX-License-Identifier: MIT OR Apache-2.0
import init, { layer_view, tsne_view, match_query } from "./pkg/ascprobe_demo.js";

const COLORS = {
  resultative: "#1f77b4",
  caused_motion: "#ff7f0e",
  ditransitive: "#2ca02c",
  way: "#d62728",
};

const $ = (id) => document.getElementById(id);

function scatter(canvas, points) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const span = (v) => [Math.min(...v), Math.max(...v)];
  const [x0, x1] = span(xs);
  const [y0, y1] = span(ys);
  const pad = 20;
  const scale = (v, lo, hi, size) => (hi > lo ? pad + ((v - lo) / (hi - lo)) * (size - 2 * pad) : size / 2);
  canvas.onmousemove = null;
  const placed = points.map((p) => ({
    ...p,
    px: scale(p.x, x0, x1, canvas.width),
    py: canvas.height - scale(p.y, y0, y1, canvas.height),
  }));
  for (const p of placed) {
    ctx.fillStyle = COLORS[p.label];
    ctx.beginPath();
    ctx.arc(p.px, p.py, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
  canvas.title = "";
  canvas.onmousemove = (ev) => {
    const r = canvas.getBoundingClientRect();
    const mx = ev.clientX - r.left;
    const my = ev.clientY - r.top;
    const hit = placed.find((p) => Math.hypot(p.px - mx, p.py - my) < 6);
    canvas.title = hit ? `${hit.id} (${hit.label})` : "";
  };
}

function showError(el, message) {
  el.innerHTML = "";
  const span = document.createElement("span");
  span.className = "error";
  span.textContent = message;
  el.appendChild(span);
}

function updateLayer() {
  const layer = Number($("lv-layer").value);
  $("lv-layer-out").textContent = layer;
  const result = JSON.parse(layer_view(Number($("lv-seed").value), layer, $("lv-role").value));
  if (result.error) return showError($("lv-stats"), result.error);
  scatter($("lv-canvas"), result.mds.points);
  const probe = result.probe.error
    ? `probe: ${result.probe.error}`
    : `probe accuracy   ${result.probe.mean.toFixed(3)} (chance ${result.probe.chance})\n` +
      `folds            ${result.probe.folds.map((f) => f.toFixed(2)).join(" ")}\n` +
      `sentences        ${result.probe.n}`;
  $("lv-stats").textContent =
    `layer            ${result.layer}\n` +
    `CLS GDV          ${result.gdv.toFixed(4)}\n` +
    `MDS distance r   ${result.mds.quality.toFixed(4)}${result.mds.degenerate ? " (degenerate)" : ""}\n\n` +
    probe;
}

function updateTsne() {
  $("ts-stats").textContent = "running...";
  setTimeout(() => {
    const result = JSON.parse(
      tsne_view(
        Number($("lv-seed").value),
        Number($("ts-layer").value),
        Number($("ts-perplexity").value),
        Number($("ts-iterations").value),
      ),
    );
    if (result.error) return showError($("ts-stats"), result.error);
    scatter($("ts-canvas"), result.points);
    $("ts-stats").textContent =
      `layer            ${result.layer}\n` +
      `final KL         ${result.kl.toFixed(4)}\n` +
      `distance r       ${result.quality.toFixed(4)}\n` +
      result.warnings.map((w) => `warning: ${w}`).join("\n");
  }, 10);
}

function updateMatch() {
  const out = $("pm-out");
  const result = JSON.parse(
    match_query($("pm-query").value, $("pm-dialect").value, $("pm-sentence").value, Number($("pm-gap").value)),
  );
  if (result.error) return showError(out, result.error);
  out.innerHTML = "";
  if (result.matches.length === 0) {
    out.textContent = "no match";
    return;
  }
  for (const m of result.matches) {
    const line = document.createElement("p");
    result.tokens.forEach((word, i) => {
      const el = document.createElement(m.words.includes(i) ? "mark" : "span");
      el.textContent = word;
      line.appendChild(el);
      line.appendChild(document.createTextNode(" "));
    });
    const note = document.createElement("small");
    note.textContent = `  words ${m.start}..${m.end - 1}`;
    line.appendChild(note);
    out.appendChild(line);
  }
}

await init();
$("legend").innerHTML = Object.entries(COLORS)
  .map(([label, color]) => `<span><i style="background:${color}"></i>${label.replace("_", "-")}</span>`)
  .join("");
for (const id of ["lv-layer", "lv-role", "lv-seed"]) $(id).addEventListener("input", updateLayer);
$("ts-run").addEventListener("click", updateTsne);
for (const id of ["pm-dialect", "pm-gap", "pm-query", "pm-sentence"]) $(id).addEventListener("input", updateMatch);
updateLayer();
updateTsne();
updateMatch();
