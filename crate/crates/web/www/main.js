import init, { classify, density, vdp } from "./pkg/degendiff_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(target, e) {
  target.innerHTML = `<span class="error">${e.message ?? e}</span>`;
}

function fmtEnd(x) {
  if (x === "inf") return "+∞";
  if (x === "-inf") return "−∞";
  return String(x);
}

function runClassify() {
  const out = $("cls-out");
  try {
    const subs = JSON.parse(classify(num("cls-c")));
    const rows = subs.map((s) => {
      const iv = `(${fmtEnd(s.interval.left)}, ${fmtEnd(s.interval.right)})`;
      return `<tr><td>${iv}</td><td>${s.left.nature}</td><td>${s.right.nature}</td><td>${s.ergodic.kind}</td></tr>`;
    });
    out.innerHTML = `<table><tr><th>subinterval</th><th>left end</th><th>right end</th><th>long-run behaviour</th></tr>${rows.join("")}</table>`;
  } catch (e) {
    fail(out, e);
  }
}

function runDensity() {
  const out = $("den-out");
  const canvas = $("den-canvas");
  const ctx = canvas.getContext("2d");
  try {
    const v = JSON.parse(density(num("den-c"), num("den-n"), num("den-seed")));
    const { width: w, height: h } = canvas;
    ctx.clearRect(0, 0, w, h);
    const n = v.bins.length;
    const top = Math.max(...v.bins, ...v.reference, 1e-12) * 1.05;
    const bw = w / n;
    ctx.fillStyle = "#8ab4e0";
    v.bins.forEach((d, i) => {
      const bh = (d / top) * (h - 20);
      ctx.fillRect(i * bw, h - 20 - bh, Math.max(bw - 0.5, 0.5), bh);
    });
    if (v.reference.length === n) {
      ctx.strokeStyle = "#c0392b";
      ctx.lineWidth = 2;
      ctx.beginPath();
      v.reference.forEach((d, i) => {
        const x = (i + 0.5) * bw;
        const y = h - 20 - (d / top) * (h - 20);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
    }
    ctx.fillStyle = "#222";
    for (let t = Math.ceil(v.lo); t <= v.hi; t++) {
      const x = ((t - v.lo) / (v.hi - v.lo)) * w;
      ctx.fillRect(x, h - 20, 1, 5);
      ctx.fillText(String(t), x + 2, h - 6);
    }
    const [l, r] = v.side_mass;
    const l1 = v.l1_distance === null ? "n/a" : v.l1_distance.toFixed(4);
    out.textContent =
      `mass left of 0: ${l.toFixed(5)}, right: ${r.toFixed(5)}; ` +
      `L1 to the speed density: ${l1}; crossings of 0: ${v.crossings}` +
      (v.last_crossing === null ? "" : ` (last at step ${v.last_crossing})`) +
      ". Bars: scheme, line: normalized speed density on the occupied side.";
  } catch (e) {
    fail(out, e);
  }
}

function runVdp() {
  const out = $("vdp-out");
  const canvas = $("vdp-canvas");
  const ctx = canvas.getContext("2d");
  try {
    const v = JSON.parse(vdp(num("vdp-c"), num("vdp-n"), num("vdp-seed")));
    const { width: w, height: h } = canvas;
    const n = v.cells;
    const cw = w / n;
    const ch = h / n;
    const top = Math.max(...v.density, 1e-12);
    const img = ctx.createImageData(w, h);
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < n; j++) {
        // log scale keeps the limit cycle visible next to the origin peak
        const d = v.density[i * n + j];
        const t = d > 0 ? Math.max(0, 1 + Math.log10(d / top) / 4) : 0;
        const shade = Math.round(255 * (1 - t));
        const x0 = Math.floor(i * cw);
        const y0 = Math.floor((n - 1 - j) * ch);
        for (let y = y0; y < Math.floor(y0 + ch); y++) {
          for (let x = x0; x < Math.floor(x0 + cw); x++) {
            const k = 4 * (y * w + x);
            img.data[k] = shade;
            img.data[k + 1] = shade;
            img.data[k + 2] = 255;
            img.data[k + 3] = 255;
          }
        }
      }
    }
    ctx.putImageData(img, 0, 0);
    out.textContent =
      `mass of the 3×3 block around the origin: ${v.origin_block_mass.toFixed(5)}; ` +
      `heaviest cell: ${v.max_cell_mass.toFixed(5)}. Axes span [${v.lo}, ${v.hi}]², log colour scale.`;
  } catch (e) {
    fail(out, e);
  }
}

await init();
$("cls-run").onclick = runClassify;
$("den-run").onclick = runDensity;
$("vdp-run").onclick = runVdp;
runClassify();
