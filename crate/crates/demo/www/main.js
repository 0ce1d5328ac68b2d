import init, { Playground, space_table, overslack, trial } from "./pkg/bslack_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

let tree;

function showError(target, message) {
  target.innerHTML = `<p class="error">${message}</p>`;
}

function render(json) {
  const v = JSON.parse(json);
  $("summary").innerHTML = [
    `keys ${v.keys}`,
    `height ${v.height}`,
    `nodes ${v.nodes}`,
    `avg degree ${v.average_degree.toFixed(2)}`,
    `words/key ${v.words_per_key.toFixed(3)}`,
    `potential ${v.potential}`,
    v.strict ? "strict" : `violations pending (${v.pending} queued)`,
    v.last_step ? `last step: ${v.last_step}` : "",
  ].map((s) => `<span>${s}</span>`).join("");
  $("rows").innerHTML = v.rows.map((r) => {
    const label = r.leaf ? `[${r.keys.join(" ")}]` : `(${r.keys.join(" ")})`;
    const flags = r.violations.length ? `  <- ${r.violations.join(", ")}` : "";
    const cls = ["node", r.weight === 0 ? "w0" : "", flags ? "bad" : ""].join(" ");
    return `<div class="${cls}">${"    ".repeat(r.depth)}${label}${r.weight === 0 ? " w=0" : ""}${flags}</div>`;
  }).join("");
  $("dump").textContent = tree.dump();
}

function reset() {
  try {
    tree = new Playground(num("b"), $("policy").value);
    tree.set_deferred($("deferred").checked);
    render(tree.view());
  } catch (e) {
    showError($("rows"), e);
  }
}

function table() {
  const rows = JSON.parse(space_table($("bs").value, num("min-keys")));
  if (rows.error) return showError($("table-out"), rows.error);
  const body = rows.map((r) =>
    `<tr><td style="text-align:left">${r.family}</td><td>${r.b}</td><td>${r.height}</td><td>${r.n}</td><td>${r.ratio.toFixed(3)}</td></tr>`
  ).join("");
  $("table-out").innerHTML =
    `<table><tr><th>family</th><th>b</th><th>height</th><th>keys</th><th>words/key</th></tr>${body}</table>`;
}

function runTrial() {
  $("trial-summary").textContent = "running...";
  setTimeout(() => {
    const r = JSON.parse(trial(num("t-b"), num("t-size"), num("t-ops"), num("t-ins"), num("t-seed"), "standard"));
    if (r.error) return showError($("trial-summary"), r.error);
    const total = r.histogram.reduce((a, h) => a + h.count, 0);
    $("trial-summary").innerHTML = [
      `${r.inserts + r.deletes} successful updates`,
      `${r.steps_per_update.toFixed(3)} steps per update`,
      `avg degree ${r.average_degree.toFixed(2)}`,
      `words/key ${r.words_per_key.toFixed(3)}`,
      `height ${r.height}`,
    ].map((s) => `<span>${s}</span>`).join("");
    $("histogram").innerHTML = "<tr><th>steps</th><th>updates</th><th>share</th><th></th></tr>" +
      r.histogram.map((h) => {
        const share = total ? h.count / total : 0;
        return `<tr><td>${h.steps}</td><td>${h.count}</td><td>${(share * 100).toFixed(2)}%</td>` +
          `<td style="text-align:left"><span class="bar" style="width:${Math.max(1, share * 300)}px"></span></td></tr>`;
      }).join("");
  }, 0);
}

await init();

$("reset").onclick = reset;
$("deferred").onchange = () => tree.set_deferred($("deferred").checked);
$("insert").onclick = () => render(tree.insert(num("key")));
$("delete").onclick = () => render(tree.delete(num("key")));
$("random").onclick = () => render(tree.random(20, 100, 60, Math.floor(Math.random() * 2 ** 32)));
$("step").onclick = () => render(tree.step());
$("cleanup").onclick = () => render(tree.cleanup());
$("table").onclick = table;
$("overslack").onclick = () => {
  const r = JSON.parse(overslack(num("os-b"), num("os-k"), num("os-h")));
  $("overslack-out").textContent = JSON.stringify(r, null, 2);
};
$("trial").onclick = runTrial;

reset();
table();
