import init, { mixing_curve, chernoff, double_well_profile } from "./pkg/mdk_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (v) => (typeof v === "number" ? v : v === "inf" ? Infinity : v === "-inf" ? -Infinity : NaN);

function plot(canvas, xs, ys, logY) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const pts = xs.map((x, i) => [x, logY ? Math.log10(ys[i]) : ys[i]]).filter(([, y]) => Number.isFinite(y));
  if (pts.length === 0) return;
  const x0 = Math.min(...pts.map((p) => p[0])), x1 = Math.max(...pts.map((p) => p[0]));
  const y0 = Math.min(...pts.map((p) => p[1])), y1 = Math.max(...pts.map((p) => p[1]));
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  const fmt = (y) => (logY ? "1e" + y.toFixed(1) : y.toPrecision(3));
  ctx.fillText(fmt(y1), 2, pad + 4);
  ctx.fillText(fmt(y0), 2, h - pad);
  ctx.fillText(String(x0), pad, h - pad + 14);
  ctx.fillText(String(x1), w - pad - 20, h - pad + 14);
  ctx.strokeStyle = "#1565c0";
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
  ctx.stroke();
}

function guard(out, f) {
  out.classList.remove("err");
  try {
    f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

function runMix() {
  guard($("mix-out"), () => {
    const t = Number($("mix-t").value);
    const r = JSON.parse(mixing_curve($("mix-chain").value, $("mix-div").value, Number($("mix-alpha").value), $("mix-mode").value, t));
    const ys = r.values.map(num);
    plot($("mix-plot"), ys.map((_, i) => i + 1), ys, true);
    $("mix-out").textContent = "pi = " + JSON.stringify(r.pi) + "\nlast = " + r.values[r.values.length - 1];
  });
}

function runChernoff() {
  guard($("ch-out"), () => {
    const r = JSON.parse(chernoff($("ch-p0").value, $("ch-p1").value, Number($("ch-points").value)));
    plot($("ch-plot"), r.curve.map((p) => p[0]), r.curve.map((p) => num(p[1])), false);
    $("ch-out").textContent = `C = ${r.value} at alpha = ${r.alpha_star}`;
  });
}

function runWell() {
  guard($("dw-out"), () => {
    const betas = new Float64Array($("dw-betas").value.split(",").map(Number));
    const rows = JSON.parse(double_well_profile(betas, Number($("dw-eps").value)));
    $("dw-out").textContent = "beta\tdobrushin\ttime\n" + rows.map((r) => `${r.beta}\t${r.dobrushin_tv.toFixed(6)}\t${r.time}`).join("\n");
  });
}

await init();
$("mix-run").onclick = runMix;
$("ch-run").onclick = runChernoff;
$("dw-run").onclick = runWell;
runMix();
runChernoff();
runWell();
