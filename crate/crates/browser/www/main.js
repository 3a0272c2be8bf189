import init, { run_flow, bound_table, gap_curve } from "./pkg/lsbd_browser.js";

const $ = (id) => document.getElementById(id);
const fmt = (x, p = 6) => (x === null || x === undefined ? "" : Number(x).toPrecision(p));

function modelConfig() {
  const f = $("run-form");
  const get = (n) => f.querySelector(`[name=${n}]`).value;
  const sites = parseInt(get("sites"), 10);
  const model = get("kind") === "phi4"
    ? { kind: "phi4", sites, dim: parseInt(get("dim"), 10) }
    : { kind: "spin", sites };
  return { model, t: parseFloat(get("t")) };
}

function table(head, rows) {
  const h = head.map((c) => `<th>${c}</th>`).join("");
  const b = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table><tr>${h}</tr>${b}</table>`;
}

function guard(out, f) {
  try {
    f();
  } catch (e) {
    out.innerHTML = `<p class="err">${e.message ?? e}</p>`;
  }
}

function onRun() {
  const out = $("run-out");
  guard(out, () => {
    const r = JSON.parse(run_flow(JSON.stringify(modelConfig())));
    const steps = table(
      ["step", "gap", "|S|", "|V| after", "order"],
      r.steps.map((s) => [s.step, fmt(s.gap, 10), fmt(s.s_norm), fmt(s.v_after), s.series_order]),
    );
    const claims = table(
      ["claim", "status", "detail"],
      r.claims.map((c) => [c.name, `<span class="${c.status}">${c.status}</span>`, `<span style="text-align:left">${c.detail}</span>`]),
    );
    out.innerHTML =
      `<p>verdict <b class="${r.verdict}">${r.verdict}</b>, final gap ${fmt(r.final_gap, 12)}, ` +
      `spectrum vs exact ${fmt(r.spectrum_distance, 3)}</p>${steps}${claims}`;
  });
}

function onBounds() {
  const out = $("bounds-out");
  guard(out, () => {
    const b = JSON.parse(bound_table(parseInt($("b-sites").value, 10), parseFloat($("b-t").value)));
    const last = new Map();
    for (const row of b.table.rows) {
      last.set(`${row.interval.edges},${row.interval.left}`, row);
    }
    const rows = [...last.values()].map((row) => [
      `I(${row.interval.edges},${row.interval.left})`,
      fmt(row.bound),
      fmt(row.cap),
      row.bound <= row.cap ? '<span class="pass">yes</span>' : '<span class="fail">no</span>',
    ]);
    out.innerHTML =
      `<p>c = ${fmt(b.params.c)}, a = ${fmt(b.params.a)}, a/4 = ${fmt(b.radius)}, ` +
      `gap prefactor ${b.prefactor === null ? "diverges" : fmt(b.prefactor)}; final-step values:</p>` +
      table(["interval", "E", "t^((r-1)/4)", "E <= cap"], rows);
  });
}

function plot(points) {
  const cv = $("curve");
  const ctx = cv.getContext("2d");
  const W = cv.width, H = cv.height, pad = 40;
  ctx.clearRect(0, 0, W, H);
  const tmax = points[points.length - 1].t;
  const x = (t) => pad + (W - 2 * pad) * (t / tmax);
  const y = (g) => H - pad - (H - 2 * pad) * (g / 1.1);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad / 2, W - 2 * pad, H - 1.5 * pad);
  ctx.setLineDash([4, 4]);
  ctx.beginPath(); ctx.moveTo(pad, y(0.5)); ctx.lineTo(W - pad, y(0.5)); ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#444";
  ctx.fillText("gap 1/2", W - pad - 40, y(0.5) - 4);
  ctx.fillText("0", pad - 4, H - pad + 14);
  ctx.fillText(String(tmax), W - pad - 10, H - pad + 14);
  ctx.fillText("t", W / 2, H - 8);
  for (const p of points) {
    if (p.gap === null) continue;
    ctx.fillStyle = p.verdict === "pass" ? "#176f2c" : "#b00020";
    ctx.beginPath(); ctx.arc(x(p.t), y(Math.min(p.gap, 1.1)), 3, 0, 2 * Math.PI); ctx.fill();
  }
}

function onCurve() {
  const out = $("curve-out");
  guard(out, () => {
    const pts = JSON.parse(gap_curve(JSON.stringify(modelConfig()), parseFloat($("c-tmax").value), parseInt($("c-n").value, 10)));
    plot(pts);
    const passing = pts.filter((p) => p.verdict === "pass");
    out.innerHTML = `<p>${passing.length} of ${pts.length} points fully certified (green)</p>`;
  });
}

init().then(() => {
  $("status").textContent = "ready";
  $("run-btn").addEventListener("click", onRun);
  $("bounds-btn").addEventListener("click", onBounds);
  $("curve-btn").addEventListener("click", onCurve);
});
