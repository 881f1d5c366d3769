import init, { preset, explore, lite_hash, split, combine } from "./pkg/tba_web.js";

const $ = (id) => document.getElementById(id);

function show(id, text, cls = "") {
  $(id).textContent = text;
  $(id).className = cls;
}

function load() {
  $("config").value = preset($("preset").value, BigInt($("seed").value || 0));
  run();
}

function run() {
  let out;
  try {
    out = JSON.parse(explore($("config").value, BigInt($("flip-chunk").value || -1), Number($("flip-offset").value || 0)));
  } catch (e) {
    show("verdict", String(e), "tampered");
    return;
  }
  if (!out.chunks.length) {
    show("verdict", "no recording: " + (out.report?.verdict ?? ""), "unverifiable");
    $("chunks").replaceChildren();
    $("events").textContent = JSON.stringify(out.report?.events ?? [], null, 1);
    return;
  }
  let line = `${out.verdict}, widest bracket ${out.max_width ?? "-"} ticks`;
  if (out.adversary_success) line += ", forger succeeded";
  show("verdict", line, out.verdict);
  const rows = [["chunk", "start", "end", "bytes", "head", "bracket", "problems"]];
  for (const c of out.chunks) {
    const b = c.bracket ? `[${c.bracket.t_past}, ${c.bracket.t_future}]` : "-";
    const p = c.problems.map((f) => f.check).join(", ");
    rows.push([c.index, c.t_start, c.t_end, c.bytes, c.head, b, p]);
  }
  $("chunks").replaceChildren(
    ...rows.map((r, i) => {
      const tr = document.createElement("tr");
      for (const v of r) {
        const td = document.createElement(i ? "td" : "th");
        td.textContent = v;
        tr.append(td);
      }
      return tr;
    }),
  );
  $("events").textContent = out.events.map((e) => `t=${e.t} ${e.kind} ${e.detail}`).join("\n");
}

function hashText() {
  $("hash-out").textContent = lite_hash(new TextEncoder().encode($("hash-text").value));
}

async function hashFile() {
  const f = $("hash-file").files[0];
  if (f) $("hash-out").textContent = lite_hash(new Uint8Array(await f.arrayBuffer()));
}

function doSplit() {
  try {
    const out = JSON.parse(split($("secret").value, Number($("share-count").value), BigInt($("share-seed").value || 0)));
    $("shares").value = out.shares.join("\n");
    $("combined").textContent = "";
  } catch (e) {
    $("combined").textContent = String(e);
  }
}

function doCombine() {
  const shares = $("shares").value.split("\n").map((s) => s.trim()).filter(Boolean);
  try {
    const out = JSON.parse(combine(JSON.stringify(shares)));
    $("combined").textContent = `${JSON.stringify(out.text)} (${out.hex})`;
  } catch (e) {
    $("combined").textContent = String(e);
  }
}

await init();
$("load").onclick = load;
$("run").onclick = run;
$("hash-text").oninput = hashText;
$("hash-file").onchange = hashFile;
$("split").onclick = doSplit;
$("combine").onclick = doCombine;
load();
hashText();
