import init, { meshOverlay, densityCurve, dropBall, defaultParams } from "./pkg/visual_mesh_web.js";

await init();

const params = JSON.parse(defaultParams());
const view = document.getElementById("view");
const chart = document.getElementById("chart");
const status = document.getElementById("status");
const sliders = ["height", "k", "pitch", "yaw", "roll", "focal_length"];
let ball = null;

view.width = params.width;
view.height = params.image_height;

function say(text, error = false) {
  status.textContent = text;
  status.className = error ? "error" : "";
}

function drawMesh() {
  const ctx = view.getContext("2d");
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, view.width, view.height);
  let overlay;
  try {
    overlay = meshOverlay(JSON.stringify(params));
  } catch (e) {
    say(String(e.message ?? e), true);
    return;
  }
  const pts = overlay.points;
  const edges = overlay.edges;
  ctx.strokeStyle = "#0878ff";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (let i = 0; i < edges.length; i += 2) {
    const a = edges[i] * 2, b = edges[i + 1] * 2;
    ctx.moveTo(pts[a], pts[a + 1]);
    ctx.lineTo(pts[b], pts[b + 1]);
  }
  ctx.stroke();
  ctx.fillStyle = "#0f0";
  for (let i = 0; i < pts.length; i += 2) ctx.fillRect(pts[i] - 1, pts[i + 1] - 1, 3, 3);

  let text = `${overlay.visible} of ${overlay.total} nodes visible, ${overlay.rings} rings`;
  if (ball) {
    const drop = JSON.parse(dropBall(JSON.stringify(params), ball[0], ball[1]));
    if (drop) {
      ctx.fillStyle = "#f33";
      for (let i = 0; i < drop.nodes.length; i += 2) ctx.fillRect(drop.nodes[i] - 3, drop.nodes[i + 1] - 3, 7, 7);
      text += ` · ball at ${drop.distance.toFixed(2)} m covers ${drop.nodes.length / 2} nodes`;
    } else {
      text += " · that pixel does not see the ground";
    }
  }
  say(text);
  overlay.free();
}

function drawChart() {
  const ctx = chart.getContext("2d");
  const { width: w, height: h } = chart;
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, w, h);
  let curve;
  try {
    curve = JSON.parse(densityCurve(JSON.stringify(params), params.max_distance, 0.1));
  } catch {
    return;
  }
  const pad = 30;
  const xMax = curve.distances[curve.distances.length - 1] || 1;
  const yMax = Math.max(1, ...curve.mesh, ...curve.rings, ...curve.hex);
  const x = (d) => pad + (d / xMax) * (w - pad - 8);
  const y = (n) => h - pad - (n / yMax) * (h - pad - 8);

  ctx.strokeStyle = "#555";
  ctx.beginPath();
  ctx.moveTo(pad, 8);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - 8, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#aaa";
  ctx.fillText("0", pad - 12, h - pad + 12);
  ctx.fillText(`${xMax.toFixed(1)} m`, w - 40, h - pad + 14);
  ctx.fillText(String(yMax), 2, 14);

  for (const [series, colour] of [[curve.hex, "#aaa"], [curve.rings, "#fc6"], [curve.mesh, "#6cf"]]) {
    ctx.strokeStyle = colour;
    ctx.beginPath();
    series.forEach((n, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(curve.distances[i]), y(n)));
    ctx.stroke();
  }
}

function refresh(geometryChanged) {
  drawMesh();
  if (geometryChanged) drawChart();
}

for (const id of sliders) {
  const input = document.getElementById(id);
  const out = input.nextElementSibling;
  input.value = params[id];
  out.value = params[id];
  input.addEventListener("input", () => {
    params[id] = id === "k" ? parseInt(input.value, 10) : parseFloat(input.value);
    out.value = input.value;
    refresh(true);
  });
}

const projection = document.getElementById("projection");
projection.value = params.projection;
projection.addEventListener("change", () => {
  params.projection = projection.value;
  refresh(true);
});

view.addEventListener("click", (e) => {
  const rect = view.getBoundingClientRect();
  ball = [(e.clientX - rect.left) * (view.width / rect.width), (e.clientY - rect.top) * (view.height / rect.height)];
  refresh(false);
});

refresh(true);
