import init, { difficulty, solve, temper } from "./pkg/sdmlab_web.js";

const CHAIN = `{
  "states": 4,
  "actions": 2,
  "applicable": [[0, 1], [0], [0], []],
  "transitions": [
    {"s": 0, "a": 0, "next": [[2, 1.0]]},
    {"s": 0, "a": 1, "next": [[1, 1.0]]},
    {"s": 1, "a": 0, "next": [[2, 1.0]]},
    {"s": 2, "a": 0, "next": [[3, 1.0]]}
  ],
  "costs": [[1.0], [1.0], [1.0], [1.0]],
  "initial": 0,
  "goal": 3
}`;

const $ = (id) => document.getElementById(id);

function show(id, f) {
  try {
    $(id).textContent = JSON.stringify(JSON.parse(f()), null, 2);
  } catch (e) {
    $(id).textContent = `error: ${e.message ?? e}`;
  }
}

function drawPath(w, h, path) {
  const steps = { U: [0, -1], R: [1, 0], D: [0, 1], L: [-1, 0] };
  const visited = new Map([["0,0", "S"]]);
  let [x, y] = [0, 0];
  for (const m of path) {
    const [dx, dy] = steps[m] ?? [0, 0];
    [x, y] = [x + dx, y + dy];
    visited.set(`${x},${y}`, m);
  }
  const grid = $("grid");
  grid.innerHTML = "";
  for (let r = 0; r < h; r++) {
    const row = grid.insertRow();
    for (let c = 0; c < w; c++) {
      const cell = row.insertCell();
      const key = `${c},${r}`;
      if (c === w - 1 && r === h - 1) cell.className = "goal";
      else if (visited.has(key)) cell.className = "path";
      cell.textContent = visited.get(key) ?? "";
    }
  }
}

function runSolve() {
  const [w, h] = [Number($("w").value), Number($("h").value)];
  show("solve-out", () => {
    const out = solve(w, h, Number($("seed").value), Number($("budget").value));
    drawPath(w, h, JSON.parse(out).path);
    return out;
  });
}

function runTemper() {
  const weights = Float64Array.from($("weights").value.split(",").map(Number));
  const beta = Number($("beta").value);
  $("beta-value").textContent = beta;
  show("temper-out", () => temper(weights, beta));
}

await init();
$("mdp").value = CHAIN;
$("run-difficulty").onclick = () => show("difficulty-out", () => difficulty($("mdp").value));
$("run-solve").onclick = runSolve;
$("beta").oninput = runTemper;
$("weights").onchange = runTemper;
runTemper();
