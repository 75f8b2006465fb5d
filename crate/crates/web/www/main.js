import init, { phase_portrait, prune_demo, batch_plan } from "./pkg/narx_prune_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Maps data coordinates onto a canvas with a small margin.
function frame(canvas, xs, ys) {
  const pad = 20;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (canvas.width - 2 * pad) / (x1 - x0 || 1);
  const sy = (canvas.height - 2 * pad) / (y1 - y0 || 1);
  return ([x, y]) => [pad + (x - x0) * sx, canvas.height - pad - (y - y0) * sy];
}

function dot(ctx, [x, y], r, color) {
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fill();
}

function fail(target, err) {
  target.innerHTML = `<span class="err">${err}</span>`;
}

function drawPortrait() {
  const canvas = $("pp-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let data;
  try {
    data = JSON.parse(phase_portrait($("pp-forced").checked, num("pp-grid"), num("pp-dur")));
  } catch (e) {
    ctx.fillStyle = "#b00";
    ctx.fillText(String(e), 20, 20);
    return;
  }
  const xs = data.trajectories.flatMap((t) => t.y);
  const ys = data.trajectories.flatMap((t) => t.v);
  const map = frame(canvas, xs, ys);
  ctx.lineWidth = 0.8;
  for (const t of data.trajectories) {
    ctx.strokeStyle = t.basin === "left" ? "#1f77b4" : "#d62728";
    ctx.beginPath();
    t.y.forEach((y, i) => {
      const [px, py] = map([y, t.v[i]]);
      i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
    });
    ctx.stroke();
  }
  for (const e of data.equilibria) dot(ctx, map([e, 0]), 4, "#000");
}

function drawPrune() {
  const canvas = $("pd-canvas");
  const ctx = canvas.getContext("2d");
  const out = $("pd-out");
  out.textContent = "running...";
  // let the status text paint before the blocking call
  setTimeout(() => {
    let d;
    try {
      d = JSON.parse(prune_demo($("pd-data").value, num("pd-dseed"), num("pd-n"), num("pd-q"), num("pd-p"), num("pd-seed")));
    } catch (e) {
      fail(out, e);
      return;
    }
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const all = [...d.samples, ...d.atoms, ...d.fastcan.points, ...d.random.points];
    const map = frame(canvas, all.map((p) => p[0]), all.map((p) => p[1]));
    d.samples.forEach((p, i) => dot(ctx, map(p), 1.2, d.sample_basins[i] === "left" ? "#9ecae1" : "#ccc"));
    d.random.points.forEach((p) => dot(ctx, map(p), 3, "#9467bd"));
    d.fastcan.points.forEach((p) => dot(ctx, map(p), 3, "#ff7f0e"));
    d.atoms.forEach((p) => dot(ctx, map(p), 5, "#2ca02c"));
    const fmt = (s) => (s.r2 === null ? `failed: ${s.error}` : s.r2.toFixed(5));
    out.textContent = [
      `samples ${d.n_samples}, left-basin share ${d.left_share.toFixed(3)}, batch size ${d.effective_p}`,
      `terms: ${d.terms.join(", ")}`,
      `coefficient R2  FastCan ${fmt(d.fastcan)}   random ${fmt(d.random)}`,
      `left-basin fraction  FastCan ${d.fastcan.left_fraction.toFixed(3)}   random ${d.random.left_fraction.toFixed(3)}`,
    ].join("\n");
  }, 10);
}

function showPlan() {
  const out = $("bp-out");
  let plan;
  try {
    plan = JSON.parse(batch_plan(num("bp-n"), num("bp-q"), num("bp-m"), num("bp-p")));
  } catch (e) {
    fail(out, e);
    return;
  }
  const rows = plan.entries
    .map((row, i) => `<tr><td>atom ${i}</td>${row.map((v) => `<td>${v}</td>`).join("")}</tr>`)
    .join("");
  out.innerHTML = `<p>batch size ${plan.p}, ${plan.t} batch column(s)</p><table class="batches">${rows}</table>`;
}

await init();
$("pp-run").onclick = drawPortrait;
$("pd-run").onclick = drawPrune;
for (const id of ["bp-n", "bp-q", "bp-m", "bp-p"]) $(id).oninput = showPlan;
drawPortrait();
showPlan();
