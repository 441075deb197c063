// Built with: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { select, overlap, estimate } from "./pkg/pucausal_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const sim = () => [$("kind").value, num("n"), num("seed")];

function guard(outId, f) {
  try {
    f();
  } catch (e) {
    const out = $(outId);
    out.className = "err";
    out.textContent = String(e);
  }
}

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px sans-serif";
  return ctx;
}

// Strip plot of unlabeled units by final score; hidden treated on top, controls below.
function drawSelection(r) {
  const c = $("select-plot");
  const ctx = clear(c);
  const scores = r.points.map((p) => p.score);
  const lo = Math.min(...scores), hi = Math.max(...scores);
  const x = (s) => 40 + ((s - lo) / (hi - lo || 1)) * (c.width - 60);
  for (const p of r.points) {
    const y = (p.treated ? 60 : 150) + (Math.random() - 0.5) * 50;
    ctx.fillStyle = p.reliable ? (p.treated ? "#d62728" : "#1f77b4") : "#bbb";
    ctx.fillRect(x(p.score) - 1.5, y - 1.5, 3, 3);
  }
  ctx.fillStyle = "#222";
  ctx.fillText("hidden treated", 4, 20);
  ctx.fillText("true controls", 4, 110);
  ctx.fillText("blue: selected control   red: leaked treated   grey: left unlabeled", 40, c.height - 6);
}

function drawHistogram(ctx, rows, bins, x0, w, h, title) {
  const max = Math.max(1, ...rows.map((b) => b.count));
  const bw = w / bins;
  rows.forEach((b) => {
    const i = Math.round(b.bin_lo * bins);
    const treated = b.group === "treated";
    const bh = (b.count / max) * (h - 40);
    ctx.fillStyle = treated ? "rgba(214,39,40,.6)" : "rgba(31,119,180,.6)";
    ctx.fillRect(x0 + i * bw + (treated ? 0 : bw / 2), h - 20 - bh, bw / 2 - 1, bh);
  });
  ctx.fillStyle = "#222";
  ctx.fillText(title, x0, 14);
  ctx.fillText("0", x0, h - 6);
  ctx.fillText("1", x0 + w - 6, h - 6);
}

function drawOverlap(r) {
  const c = $("overlap-plot");
  const ctx = clear(c);
  const w = c.width / 2 - 30;
  drawHistogram(ctx, r.before, r.bins, 10, w, c.height, "before trimming");
  if (r.after) drawHistogram(ctx, r.after, r.bins, c.width / 2 + 10, w, c.height, "after trimming");
  ctx.strokeStyle = "#444";
  for (const b of r.bounds) {
    const xb = 10 + b * w;
    ctx.beginPath();
    ctx.moveTo(xb, 20);
    ctx.lineTo(xb, c.height - 20);
    ctx.stroke();
  }
}

function drawEstimates(r) {
  const c = $("estimate-plot");
  const ctx = clear(c);
  const vals = r.estimates.flatMap((e) => e.ci).concat([r.oracle]);
  const lo = Math.min(...vals), hi = Math.max(...vals);
  const x = (v) => 120 + ((v - lo) / (hi - lo || 1)) * (c.width - 160);
  ctx.strokeStyle = "#2ca02c";
  ctx.beginPath();
  ctx.moveTo(x(r.oracle), 5);
  ctx.lineTo(x(r.oracle), c.height - 20);
  ctx.stroke();
  ctx.fillStyle = "#2ca02c";
  ctx.fillText(`oracle ${r.oracle.toFixed(3)}`, x(r.oracle) + 4, c.height - 6);
  r.estimates.forEach((e, i) => {
    const y = 25 + i * 40;
    ctx.fillStyle = "#222";
    ctx.fillText(e.method, 10, y + 4);
    ctx.strokeStyle = "#222";
    ctx.beginPath();
    ctx.moveTo(x(e.ci[0]), y);
    ctx.lineTo(x(e.ci[1]), y);
    ctx.stroke();
    ctx.fillRect(x(e.ate) - 3, y - 3, 6, 6);
  });
}

function runSelect() {
  guard("select-out", () => {
    const r = JSON.parse(select(...sim(), $("method").value, $("features").value));
    $("select-out").className = "";
    $("select-out").textContent =
      `positives ${r.n_positives} (spies ${r.n_spies}), reliable controls ${r.n_reliable}\n` +
      `recall ${r.recall.text}  precision ${r.precision.text}  ` +
      `contamination ${r.contamination.text}  leakage ${r.leakage.text}\n` +
      `reliable set per round: ${r.trace.join(" -> ")}` +
      (r.warnings.length ? `\n${r.warnings.join("\n")}` : "");
    drawSelection(r);
  });
}

function runOverlap() {
  guard("overlap-out", () => {
    const r = JSON.parse(overlap(...sim(), num("lo"), num("hi"), num("bins")));
    $("overlap-out").className = "";
    const kept = r.retained ? `retained ${r.retained[0]} treated, ${r.retained[1]} controls` : "no retained sample";
    $("overlap-out").textContent =
      `groups ${r.group_sizes[0]} treated, ${r.group_sizes[1]} reliable controls; ${kept}` +
      (r.separated ? "\nlogistic fit separated the groups" : "") +
      (r.warnings.length ? `\n${r.warnings.join("\n")}` : "");
    drawOverlap(r);
  });
}

function runEstimate() {
  guard("estimate-out", () => {
    const r = JSON.parse(estimate(...sim(), num("lo"), num("hi"), num("reps")));
    const fmt = (v) => (v === null ? "-" : v.toFixed(3));
    const rows = r.estimates
      .map((e) => `<tr><th>${e.method}</th><td>${fmt(e.ate)}</td><td>[${fmt(e.ci[0])}, ${fmt(e.ci[1])}]</td>` +
        `<td>${fmt(e.p_value)}</td><td>${e.covers_oracle ? "yes" : "no"}</td></tr>`)
      .join("");
    $("estimate-out").className = "";
    $("estimate-out").innerHTML =
      `<p>${r.n_treated} treated, ${r.n_control} controls after trimming</p>` +
      `<table><tr><th></th><th>ATE</th><th>95% CI</th><th>p</th><th>covers oracle</th></tr>${rows}</table>`;
    drawEstimates(r);
  });
}

await init();
$("run-select").onclick = runSelect;
$("run-overlap").onclick = runOverlap;
$("run-estimate").onclick = runEstimate;
runSelect();
