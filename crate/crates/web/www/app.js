import init, { Demo, frechet_diagonal } from "./pkg/geo2sound_web.js";

const $ = (id) => document.getElementById(id);
const NAMES = ["vegetation", "water", "built-up", "road", "land-use mix"];
let demo = null;

function build() {
  demo?.free();
  demo = new Demo(+$("seed").value, +$("scenes").value, +$("noise").value);
  $("scene").max = demo.len() - 1;
  $("rank").disabled = true;
  $("trainout").textContent = "";
  $("bars").replaceChildren();
  show();
}

function show() {
  const i = Math.min(+$("scene").value, demo.len() - 1);
  const view = JSON.parse(demo.segment(i));
  const ctx = $("canvas").getContext("2d");
  const img = new ImageData(new Uint8ClampedArray(demo.rgba(i)), view.size, view.size);
  ctx.putImageData(img, 0, 0);
  $("caption").textContent = `${view.scene_id}: ${view.caption}`;
  const rows = NAMES.map((n, k) =>
    `<tr><td>${n}</td><td>${view.truth[k].toFixed(3)}</td><td>${view.extracted[k].toFixed(3)}</td></tr>`);
  $("descriptor").innerHTML = "<tr><th></th><th>true</th><th>extracted</th></tr>" + rows.join("");
  $("clusters").textContent = view.clusters
    .map((c) => `${c.class} ${(100 * c.area).toFixed(0)}%`).join(", ");
}

function train() {
  $("trainout").textContent = "training...";
  setTimeout(() => {
    try {
      const t = JSON.parse(demo.train(+$("epochs").value));
      $("trainout").textContent =
        `best epoch ${t.best_epoch} of ${t.epochs}, val cosine ${t.val_cosine.toFixed(3)}`;
      $("rank").disabled = false;
    } catch (e) {
      $("trainout").textContent = e.message;
    }
  }, 10);
}

function rank() {
  const r = JSON.parse(demo.rank(+$("scene").value, +$("ncand").value));
  const lo = Math.min(...r.scores, 0);
  $("bars").replaceChildren(...r.scores.map((s, j) => {
    const row = document.createElement("div");
    row.className = "bar" + (j === r.selected ? " sel" : "");
    const bar = document.createElement("div");
    bar.style.width = `${Math.max(2, 200 * (s - lo) / (1 - lo))}px`;
    const label = document.createElement("span");
    label.textContent = `#${j} ${s.toFixed(3)}${j === r.compatible ? " (compatible)" : ""}`;
    row.append(bar, label);
    return row;
  }));
}

const parse = (id) => new Float64Array($(id).value.split(",").map(Number));

function fd() {
  try {
    const f = frechet_diagonal(parse("ma"), parse("va"), parse("mb"), parse("vb"));
    $("fdout").textContent = f.toFixed(6);
  } catch (e) {
    $("fdout").textContent = e.message;
  }
}

await init();
$("build").onclick = build;
$("scene").onchange = show;
$("train").onclick = train;
$("rank").onclick = rank;
$("fd").onclick = fd;
build();
