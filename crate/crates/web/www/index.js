import init, { threshold_curve, resample_preview, reweight_map } from "./pkg/imbalance_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const PAD = 36;

function axes(ctx, w, h, xLabel, yLabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(PAD, 8);
  ctx.lineTo(PAD, h - PAD);
  ctx.lineTo(w - 8, h - PAD);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.fillText(xLabel, w / 2, h - 8);
  ctx.save();
  ctx.translate(12, h / 2);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(yLabel, 0, 0);
  ctx.restore();
}

function scaler(lo, hi, a, b) {
  const span = hi - lo || 1;
  return (v) => a + ((v - lo) / span) * (b - a);
}

function line(ctx, xs, ys, sx, sy, colour) {
  ctx.strokeStyle = colour;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
}

function vline(ctx, x, h, colour) {
  ctx.strokeStyle = colour;
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.moveTo(x, 8);
  ctx.lineTo(x, h - PAD);
  ctx.stroke();
  ctx.setLineDash([]);
}

function fail(id, e) {
  $(id).className = "out err";
  $(id).textContent = String(e);
}

function runThreshold() {
  try {
    const c = JSON.parse(
      threshold_curve(num("tc-n0"), num("tc-n1"), num("tc-ov"), num("tc-trees"), BigInt(num("tc-seed")))
    );
    const cv = $("tc-plot");
    const ctx = cv.getContext("2d");
    axes(ctx, cv.width, cv.height, "threshold", "F1");
    const sx = scaler(0, 1, PAD, cv.width - 8);
    const sy = scaler(0, 1, cv.height - PAD, 8);
    line(ctx, c.thresholds, c.validation_f1, sx, sy, "#1f77b4");
    line(ctx, c.thresholds, c.test_f1, sx, sy, "#d62728");
    vline(ctx, sx(c.tuned), cv.height, "#2ca02c");
    vline(ctx, sx(0.5), cv.height, "#999");
    $("tc-out").className = "out";
    $("tc-out").textContent =
      `validation (blue), test (red); tuned threshold ${c.tuned.toFixed(4)} (green)\n` +
      `test F1 at 0.5: ${c.default_test_f1.toFixed(4)}   at tuned: ${c.tuned_test_f1.toFixed(4)}`;
  } catch (e) {
    fail("tc-out", e);
  }
}

function scatter(canvas, points, xName, yName, bounds) {
  const ctx = canvas.getContext("2d");
  axes(ctx, canvas.width, canvas.height, xName, yName);
  const sx = scaler(bounds.x0, bounds.x1, PAD + 4, canvas.width - 12);
  const sy = scaler(bounds.y0, bounds.y1, canvas.height - PAD - 4, 12);
  for (const label of [0, 1]) {
    ctx.fillStyle = label ? "rgba(214,39,40,0.75)" : "rgba(31,119,180,0.35)";
    for (const p of points) {
      if (p.label === label) ctx.fillRect(sx(p.x) - 1.5, sy(p.y) - 1.5, 3, 3);
    }
  }
}

function runResample() {
  try {
    const r = JSON.parse(
      resample_preview($("rs-kind").value, num("rs-n0"), num("rs-n1"), num("rs-ov"), BigInt(num("rs-seed")))
    );
    const all = r.before.concat(r.after);
    const bounds = {
      x0: Math.min(...all.map((p) => p.x)),
      x1: Math.max(...all.map((p) => p.x)),
      y0: Math.min(...all.map((p) => p.y)),
      y1: Math.max(...all.map((p) => p.y)),
    };
    scatter($("rs-before"), r.before, r.x_name, r.y_name, bounds);
    scatter($("rs-after"), r.after, r.x_name, r.y_name, bounds);
    $("rs-out").className = "out";
    $("rs-out").textContent =
      `before: ${r.before_counts[0]} normal / ${r.before_counts[1]} failure   ` +
      `after: ${r.after_counts[0]} normal / ${r.after_counts[1]} failure`;
  } catch (e) {
    fail("rs-out", e);
  }
}

function runReweight() {
  try {
    const m = JSON.parse(reweight_map(num("rw-w0"), num("rw-w1"), num("rw-t")));
    const cv = $("rw-plot");
    const ctx = cv.getContext("2d");
    axes(ctx, cv.width, cv.height, "raw P(failure)", "reweighted");
    const sx = scaler(0, 1, PAD, cv.width - 8);
    const sy = scaler(0, 1, cv.height - PAD, 8);
    line(ctx, m.p, m.p, sx, sy, "#bbb");
    line(ctx, m.p, m.reweighted, sx, sy, "#9467bd");
    vline(ctx, sx(m.equivalent_threshold), cv.height, "#2ca02c");
    ctx.strokeStyle = "#2ca02c";
    ctx.beginPath();
    ctx.moveTo(PAD, sy(m.threshold));
    ctx.lineTo(cv.width - 8, sy(m.threshold));
    ctx.stroke();
    $("rw-out").className = "out";
    $("rw-out").textContent =
      `reweighting then threshold ${m.threshold.toFixed(2)} labels exactly like ` +
      `raw threshold ${m.equivalent_threshold.toFixed(4)}`;
  } catch (e) {
    fail("rw-out", e);
  }
}

await init();
$("tc-go").addEventListener("click", runThreshold);
$("rs-go").addEventListener("click", runResample);
for (const id of ["rw-w0", "rw-w1", "rw-t"]) $(id).addEventListener("input", runReweight);
runReweight();
