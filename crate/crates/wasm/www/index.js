import init, { simulatePaths, malliavinProfile, compactnessRatios, catalogKeys } from "./pkg/roughdrift_wasm.js";

const $ = (id) => document.getElementById(id);
const field = (box, name) => box.querySelector(`[name=${name}]`);
const num = (box, name) => Number(field(box, name).value);

function fillSelect(select, keys, chosen) {
  for (const k of keys) select.add(new Option(k, k, false, k === chosen));
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

// rows: arrays of equal length over [x0, x1]
function plotLines(canvas, rows, x0, x1) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  let lo = Infinity, hi = -Infinity;
  for (const r of rows) for (const v of r) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  if (hi - lo < 1e-12) { lo -= 1; hi += 1; }
  axes(ctx, w, h, pad);
  ctx.fillStyle = "#555";
  ctx.fillText(hi.toPrecision(3), 2, pad);
  ctx.fillText(lo.toPrecision(3), 2, h - pad);
  ctx.fillText(String(x0), pad, h - 10);
  ctx.fillText(String(x1), w - pad - 20, h - 10);
  rows.forEach((r, k) => {
    ctx.strokeStyle = `hsla(${(k * 47) % 360}, 60%, 45%, 0.8)`;
    ctx.beginPath();
    r.forEach((v, i) => {
      const x = pad + (i / (r.length - 1)) * (w - 2 * pad);
      const y = h - pad - ((v - lo) / (hi - lo)) * (h - 2 * pad);
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  });
}

function plotBars(canvas, values, split) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  const hi = Math.max(...values, 1e-12);
  axes(ctx, w, h, pad);
  const bw = (w - 2 * pad) / values.length;
  values.forEach((v, i) => {
    ctx.fillStyle = i < split ? "#3b6ea5" : "#c07a2c";
    const bh = (v / hi) * (h - 2 * pad);
    ctx.fillRect(pad + i * bw, h - pad - bh, Math.max(bw - 1, 1), bh);
  });
  ctx.fillStyle = "#555";
  ctx.fillText(hi.toPrecision(3), 2, pad);
  ctx.fillText("wavelets", pad, h - 10);
  ctx.fillText("Brownian paths", pad + split * bw, h - 10);
}

function chunk(flat, len) {
  const rows = [];
  for (let i = 0; i < flat.length; i += len) rows.push(Array.from(flat.subarray(i, i + len)));
  return rows;
}

function guarded(box, run) {
  const status = box.querySelector(".status");
  box.querySelector("button").addEventListener("click", () => {
    status.textContent = "";
    const t = performance.now();
    try {
      run();
      status.style.color = "#666";
      status.textContent = `${(performance.now() - t).toFixed(0)} ms`;
    } catch (e) {
      status.style.color = "";
      status.textContent = e.message ?? String(e);
    }
  });
}

function problemArgs() {
  const s = $("sim");
  return [field(s, "drift1").value, field(s, "drift2").value, num(s, "level"),
    num(s, "x0"), num(s, "horizon"), num(s, "steps")];
}

await init();
const [det, rand] = catalogKeys().split("\n\n").map((b) => b.split("\n"));
fillSelect(field($("sim"), "drift1"), det, "sign");
fillSelect(field($("sim"), "drift2"), rand, "zero");

guarded($("sim"), () => {
  const s = $("sim");
  const args = problemArgs();
  const flat = simulatePaths(...args, num(s, "paths"), num(s, "seed"));
  plotLines(s.querySelector("canvas"), chunk(flat, args[5] + 1), 0, args[4]);
});

guarded($("mall"), () => {
  const m = $("mall");
  const args = problemArgs();
  const n = args[5] + 1;
  const flat = malliavinProfile(...args, num(m, "paths"), num($("sim"), "seed"));
  const rows = chunk(flat, 2 * n).map((r) => r.slice(n));
  plotLines(m.querySelector("canvas"), rows, 0, args[4]);
});

guarded($("haar"), () => {
  const b = $("haar");
  const depth = num(b, "depth");
  const r = compactnessRatios(num(b, "alpha"), num(b, "beta"), depth, num(b, "samples"), 1);
  plotBars(b.querySelector("canvas"), Array.from(r), depth);
});
