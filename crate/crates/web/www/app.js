import init, { Explorer } from "./pkg/vr_rating_web.js";

let explorer = null;
let schema = [];
let features = {};
let thresholds = [0.5, 0.5, 0.5, 0.5];

const $ = (id) => document.getElementById(id);

function call(op, body) {
  return JSON.parse(explorer[op](JSON.stringify(body)));
}

function showError(e) {
  $("error").textContent = e ? String(e.message || e) : "";
}

function loadModel(text) {
  explorer = new Explorer(text);
  thresholds = JSON.parse(text).thresholds;
  schema = JSON.parse(explorer.schema());
  features = {};
  for (const f of schema) features[f.name] = f.kind === "binary" ? 0 : 1;
  renderControls();
  refresh();
}

function renderControls() {
  const root = $("features");
  root.replaceChildren();
  for (const f of schema) {
    const label = document.createElement("label");
    const input = document.createElement("input");
    if (f.kind === "binary") {
      input.type = "checkbox";
      input.checked = features[f.name] === 1;
      input.addEventListener("change", () => toggle(f.name));
    } else {
      input.type = "number";
      input.min = "0";
      input.value = features[f.name];
      input.addEventListener("change", () => {
        features[f.name] = Number(input.value);
        refresh();
      });
    }
    input.id = "f-" + f.name;
    label.append(input, " " + f.name.replaceAll("_", " "));
    root.append(label);
  }
}

function toggle(name) {
  try {
    const result = call("whatif", { features, flips: [name] });
    features[name] = 1 - features[name];
    $("f-" + name).checked = features[name] === 1;
    render(result.after, call("explain", { features }), call("suggest", { features }));
    showError(null);
  } catch (e) {
    $("f-" + name).checked = features[name] === 1;
    showError(e);
  }
}

function refresh() {
  try {
    render(call("rate", { features }), call("explain", { features }), call("suggest", { features }));
    showError(null);
  } catch (e) {
    showError(e);
  }
}

function render(rate, explanation, suggestions) {
  $("rating").textContent = "★".repeat(rate.rating) + "☆".repeat(5 - rate.rating);

  const bars = $("bars");
  bars.replaceChildren();
  rate.probabilities.forEach((p, k) => {
    const row = document.createElement("div");
    row.className = "bar";
    const track = document.createElement("div");
    track.className = "track";
    const fill = document.createElement("div");
    fill.className = "fill";
    fill.style.width = (100 * p).toFixed(1) + "%";
    const mark = document.createElement("div");
    mark.className = "threshold";
    mark.style.left = (100 * thresholds[k]).toFixed(1) + "%";
    track.append(fill, mark);
    row.append(`more than ${k + 1}★`, track, p.toFixed(3));
    bars.append(row);
  });

  const ex = $("explanation");
  ex.replaceChildren();
  const note = document.createElement("p");
  note.textContent = explanation.rating === 1
    ? "Contributions toward more than one star."
    : `Contributions to being ${explanation.rating}★ rather than ${explanation.rating - 1}★.`;
  ex.append(note);
  for (const item of explanation.items) {
    const row = document.createElement("div");
    row.className = "item " + (item.shap >= 0 ? "pos" : "neg");
    const value = item.shap >= 0 ? item.shap.toFixed(3) : `(${Math.abs(item.shap).toFixed(3)})`;
    row.append(item.feature.replaceAll("_", " "), value);
    ex.append(row);
  }

  const sg = $("suggestions");
  sg.replaceChildren();
  if (suggestions.items.length === 0) sg.textContent = "Nothing to add.";
  for (const item of suggestions.items) {
    const row = document.createElement("div");
    row.className = "item";
    const button = document.createElement("button");
    button.textContent = "add";
    button.addEventListener("click", () => {
      if (features[item.feature] === 0) toggle(item.feature);
    });
    const right = document.createElement("span");
    right.append("+" + item.increment.toFixed(3), button);
    row.append(item.feature.replaceAll("_", " "), right);
    sg.append(row);
  }
}

$("model-file").addEventListener("change", async (event) => {
  const file = event.target.files[0];
  if (!file) return;
  try {
    loadModel(await file.text());
    showError(null);
  } catch (e) {
    showError(e);
  }
});

await init();
try {
  const response = await fetch("model.json");
  if (response.ok) loadModel(await response.text());
  else showError("No model.json next to the page; choose a model file.");
} catch (e) {
  showError(e);
}
