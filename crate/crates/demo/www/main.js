import init, { threshold_curve, nb_spectrum, run_detection } from "./pkg/dynbethe_demo.js";

const $ = (id) => document.getElementById(id);
let seed = 1;
// Dense eigensolves are cubic in the operator size, about 1000 here.
const SPECTRUM_N = 100;

function bindValue(id) {
  const el = $(id);
  const show = () => ($(id + "-v").textContent = el.value);
  el.addEventListener("input", show);
  show();
  return el;
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}

function drawThreshold() {
  const t = Number($("th-t").value);
  const canvas = $("th-canvas");
  const ctx = canvas.getContext("2d");
  const [w, h, pad] = [canvas.width, canvas.height, 36];
  axes(ctx, w, h, pad);
  const points = 101;
  const x = (i) => pad + (i / (points - 1)) * (w - 2 * pad);
  const y = (a) => h - pad - a * (h - 2 * pad);
  const curves = [
    [threshold_curve(t, points), "#1f77b4"],
    [threshold_curve(0, points), "#aaa"],
  ];
  for (const [curve, color] of curves) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    curve.forEach((a, i) => (i ? ctx.lineTo(x(i), y(a)) : ctx.moveTo(x(i), y(a))));
    ctx.stroke();
  }
  ctx.fillStyle = "#444";
  ctx.fillText("eta", w - pad - 16, h - pad + 24);
  ctx.fillText("alpha_c", 4, pad - 12);
  ctx.fillText("0", pad - 4, h - pad + 14);
  ctx.fillText("1", w - pad - 4, h - pad + 14);
  ctx.fillText("1", pad - 14, y(1) + 4);
  const curve = curves[0][0];
  $("th-out").textContent =
    `T = ${t}: alpha_c(eta=0) = ${curve[0].toFixed(4)}, alpha_c(eta=0.5) = ${curve[50].toFixed(4)}, ` +
    `alpha_c(eta=1) = ${curve[points - 1].toFixed(4)}\ngrey: T = infinity`;
}

function later(out, work) {
  out.textContent = "computing...";
  setTimeout(work, 10);
}

function drawSpectrum() {
  later($("sp-out"), spectrumNow);
}

function spectrumNow() {
  const out = $("sp-out");
  let s;
  try {
    s = nb_spectrum(SPECTRUM_N, 2, 5.0, 0.7, Number($("sp-a").value), Number($("sp-xi").value), Number($("sp-h").value), BigInt(seed));
  } catch (e) {
    out.innerHTML = `<span class="err">${e}</span>`;
    return;
  }
  const eig = s.eigenvalues();
  const pred = s.predicted();
  const r = s.bulk_radius;
  const canvas = $("sp-canvas");
  const ctx = canvas.getContext("2d");
  const [w, h] = [canvas.width, canvas.height];
  let span = r;
  for (let i = 0; i < eig.length; i += 2) span = Math.max(span, Math.abs(eig[i]), Math.abs(eig[i + 1]));
  for (let i = 0; i < pred.length; i += 2) span = Math.max(span, Math.abs(pred[i]));
  const scale = (Math.min(w, h) / 2 - 20) / span;
  const px = (re) => w / 2 + re * scale;
  const py = (im) => h / 2 - im * scale;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, h / 2);
  ctx.lineTo(w, h / 2);
  ctx.moveTo(w / 2, 0);
  ctx.lineTo(w / 2, h);
  ctx.stroke();
  ctx.strokeStyle = "#2ca02c";
  ctx.beginPath();
  ctx.arc(w / 2, h / 2, r * scale, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.fillStyle = "#1f77b4";
  for (let i = 0; i < eig.length; i += 2) ctx.fillRect(px(eig[i]) - 1, py(eig[i + 1]) - 1, 2, 2);
  ctx.strokeStyle = "#d62728";
  for (let i = 0; i < pred.length; i += 2) {
    const [cx, cy] = [px(pred[i]), py(pred[i + 1])];
    ctx.beginPath();
    ctx.moveTo(cx - 6, cy - 6);
    ctx.lineTo(cx + 6, cy + 6);
    ctx.moveTo(cx + 6, cy - 6);
    ctx.lineTo(cx - 6, cy + 6);
    ctx.stroke();
  }
  let outside = 0;
  for (let i = 0; i < eig.length; i += 2) if (Math.hypot(eig[i], eig[i + 1]) > r) outside++;
  out.textContent =
    `${eig.length / 2} eigenvalues, ${outside} outside the bulk radius ${r.toFixed(3)} (green); ` +
    `${pred.length / 2} predicted outliers (red crosses). n = ${SPECTRUM_N}, T = 2, c = 5, eta = 0.7.`;
  s.free();
}

function drawDetection() {
  later($("dt-out"), detectionNow);
}

function detectionNow() {
  const out = $("dt-out");
  const t = 4;
  let v;
  try {
    v = run_detection(800, t, Number($("dt-eta").value), Number($("dt-a").value), $("dt-fast").checked, BigInt(seed));
  } catch (e) {
    out.innerHTML = `<span class="err">${e}</span>`;
    return;
  }
  const n = v.n;
  const truth = v.truth();
  const est = v.estimate();
  const overlaps = v.overlaps();
  const eigs = v.eigenvalues();
  // Nodes sorted by their planted label in the first snapshot.
  const order = [...Array(n).keys()].sort((a, b) => truth[a] - truth[b] || a - b);
  const canvas = $("dt-canvas");
  const ctx = canvas.getContext("2d");
  const [w, h] = [canvas.width, canvas.height];
  ctx.clearRect(0, 0, w, h);
  const colors = ["#1f77b4", "#ff7f0e"];
  const rowH = (h - 20) / (2 * t + 1);
  const colW = w / n;
  for (let s = 0; s < t; s++) {
    order.forEach((i, x) => {
      ctx.fillStyle = colors[truth[s * n + i]];
      ctx.fillRect(x * colW, s * rowH, Math.ceil(colW), rowH - 1);
      ctx.fillStyle = colors[est[s * n + i]];
      ctx.fillRect(x * colW, (t + 1 + s) * rowH, Math.ceil(colW), rowH - 1);
    });
  }
  ctx.fillStyle = "#444";
  ctx.fillText("planted (rows: snapshots)", 4, t * rowH + rowH * 0.7);
  ctx.fillText("estimated", 4, h - 6);
  const mean = overlaps.reduce((a, b) => a + b, 0) / overlaps.length;
  out.textContent =
    `overlap per snapshot: ${Array.from(overlaps, (o) => o.toFixed(3)).join(", ")}  (mean ${mean.toFixed(3)})\n` +
    (eigs.length ? `negative eigenvalues: ${Array.from(eigs, (e) => e.toFixed(3)).join(", ")}` : "fast mode: no eigenvalues computed");
  v.free();
}

await init();
bindValue("th-t").addEventListener("input", drawThreshold);
for (const id of ["sp-xi", "sp-h", "sp-a"]) bindValue(id).addEventListener("change", drawSpectrum);
for (const id of ["dt-a", "dt-eta"]) bindValue(id);
$("sp-seed").addEventListener("click", () => {
  seed += 1;
  drawSpectrum();
});
$("dt-run").addEventListener("click", () => {
  seed += 1;
  drawDetection();
});
drawThreshold();
drawSpectrum();
drawDetection();
