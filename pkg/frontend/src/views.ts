/**
 * DOM views: dataset/sketch build panel with a live budget preview, the
 * drill-down tree, and the block-table view of sketch stats. All displayed
 * query numbers come verbatim from service responses; the only arithmetic
 * performed here is the budget preview.
 */

import type {
  ClauseJson,
  ComparatorOp,
  DatasetDescriptor,
  ServiceClient,
  SketchDescriptor,
  SketchStats,
} from "./api.js";
import { computeBudget, errorForBudget, validateTriple } from "./budget.js";
import { barModel, formatCompact, percent } from "./render_model.js";
import { DrillDownNode, exportSession } from "./tree.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface AppState {
  client: ServiceClient;
  dataset: DatasetDescriptor | null;
  sketch: SketchDescriptor | null;
  root: DrillDownNode | null;
  emphasisThreshold: number;
}

// ---------------------------------------------------------------- build panel

export function renderBuildPanel(
  container: HTMLElement,
  state: AppState,
  onSketchBuilt: () => void,
): void {
  container.replaceChildren();
  const form = el("form", "build-panel");

  const attrLabel = el("label", undefined, "attribute ");
  const attrSelect = el("select");
  for (const attribute of state.dataset?.attributes ?? []) {
    if (attribute.kind === "numeric") {
      const option = el("option", undefined, attribute.name);
      option.value = attribute.name;
      attrSelect.append(option);
    }
  }
  attrLabel.append(attrSelect);

  const mode = el("select");
  for (const value of ["guarantees", "explicit b"]) {
    const option = el("option", undefined, value);
    option.value = value;
    mode.append(option);
  }

  const mInput = numberInput("1000000");
  const pInput = numberInput("1e-6");
  const epsInput = numberInput("0.04");
  const bInput = numberInput("8852");
  const kInput = numberInput("3");
  const seedInput = numberInput("0");

  const preview = el("div", "budget-preview");
  const problem = el("div", "form-problem");
  const submit = el("button", undefined, "build summary") as HTMLButtonElement;
  submit.type = "submit";

  const refreshPreview = () => {
    if (mode.value === "explicit b") {
      const b = Number(bInput.value);
      const ok = Number.isInteger(b) && b >= 1;
      problem.textContent = ok ? "" : "b must be a positive integer";
      preview.textContent = ok ? `b = ${b}` : "";
      submit.disabled = !ok;
      return;
    }
    const triple = {
      m: Number(mInput.value),
      p: Number(pInput.value),
      epsilon: Number(epsInput.value),
    };
    const message = validateTriple(triple);
    if (message !== null) {
      problem.textContent = message;
      preview.textContent = "";
      submit.disabled = true;
      return;
    }
    problem.textContent = "";
    const b = computeBudget(triple.m, triple.p, triple.epsilon);
    const certified = errorForBudget(b, triple.m, triple.p);
    preview.textContent = `b = ${b}, certified epsilon = ${certified.toPrecision(4)}`;
    submit.disabled = false;
  };

  for (const input of [mInput, pInput, epsInput, bInput, mode]) {
    input.addEventListener("input", refreshPreview);
    input.addEventListener("change", refreshPreview);
  }
  refreshPreview();

  form.append(
    attrLabel,
    labeled("mode ", mode),
    labeled("m ", mInput),
    labeled("p ", pInput),
    labeled("epsilon ", epsInput),
    labeled("b ", bInput),
    labeled("k ", kInput),
    labeled("seed ", seedInput),
    preview,
    problem,
    submit,
  );

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    if (!state.dataset) return;
    const request =
      mode.value === "explicit b"
        ? { attribute: attrSelect.value, b: Number(bInput.value) }
        : {
            attribute: attrSelect.value,
            m: Number(mInput.value),
            p: Number(pInput.value),
            epsilon: Number(epsInput.value),
          };
    try {
      state.sketch = await state.client.buildSketch(state.dataset.id, {
        ...request,
        k: Number(kInput.value),
        seed: Number(seedInput.value),
      });
      state.root = new DrillDownNode([]);
      onSketchBuilt();
    } catch (error) {
      problem.textContent = String(error);
    }
  });

  container.append(form);
}

function numberInput(value: string): HTMLInputElement {
  const input = el("input") as HTMLInputElement;
  input.type = "text";
  input.value = value;
  input.size = 10;
  return input;
}

function labeled(text: string, control: HTMLElement): HTMLLabelElement {
  const label = el("label", undefined, text);
  label.append(control);
  return label;
}

// ------------------------------------------------------------- drill-down view

export function renderDrillDown(
  container: HTMLElement,
  state: AppState,
  onChanged: () => void,
): void {
  container.replaceChildren();
  if (!state.sketch || !state.root) {
    container.append(el("p", "hint", "Build a summary to start drilling down."));
    return;
  }
  const header = el("div", "sketch-header");
  header.textContent =
    `summary ${state.sketch.id}: attribute ${state.sketch.attribute}, ` +
    `b=${state.sketch.b}, S=${formatCompact(state.sketch.S)}, ` +
    `entries=${state.sketch.distinct_entries}` +
    (state.sketch.epsilon_certified !== null
      ? `, certified epsilon=${state.sketch.epsilon_certified.toPrecision(4)}`
      : "");
  const exportButton = el("button", undefined, "export session JSON") as HTMLButtonElement;
  exportButton.type = "button";
  exportButton.addEventListener("click", () => {
    const blob = new Blob([exportSession(state.root!)], { type: "application/json" });
    const link = el("a") as HTMLAnchorElement;
    link.href = URL.createObjectURL(blob);
    link.download = "drilldown-session.json";
    link.click();
    URL.revokeObjectURL(link.href);
  });
  header.append(exportButton);
  container.append(header, renderNode(state.root, state, onChanged));
}

function renderNode(
  node: DrillDownNode,
  state: AppState,
  onChanged: () => void,
): HTMLElement {
  const sketch = state.sketch!;
  const box = el("div", `node verdict-${node.verdict}${node.collapsed ? " collapsed" : ""}`);

  const title = el(
    "div",
    "node-predicate",
    node.clauses.length === 0 ? "whole sum" : describeClauses([...node.clauses]),
  );
  box.append(title);

  if (node.answer) {
    const model = barModel(node.answer, sketch.S, state.emphasisThreshold);
    const bar = el("div", `bar${model.muted ? " muted" : ""}${model.emphasized ? " emphasized" : ""}`);
    const fill = el("span", "bar-fill");
    fill.style.width = percent(model.fraction);
    bar.append(fill);
    if (model.bandFraction > 0) {
      const band = el("span", "bar-band");
      const left = Math.max(model.fraction - model.bandFraction, 0);
      const right = Math.min(model.fraction + model.bandFraction, 1);
      band.style.left = percent(left);
      band.style.width = percent(right - left);
      bar.append(band);
    }
    const caption = el(
      "div",
      "bar-caption",
      `${formatCompact(node.answer.estimate)} (${percent(model.fraction)} of S)` +
        (node.answer.additive_bound !== null
          ? ` +- ${formatCompact(node.answer.additive_bound)}`
          : "") +
        (node.answer.relative_bound !== null
          ? `, relative <= ${node.answer.relative_bound.toPrecision(3)}`
          : "") +
        (model.muted ? " [below resolution]" : "") +
        ` | matched entries: ${node.answer.matched_entries}`,
    );
    box.append(bar, caption);

    // the exact path is deliberately hidden behind this one explicit control
    const verify = el("button", "slow-verify", "verify against source (slow)") as HTMLButtonElement;
    verify.type = "button";
    verify.addEventListener("click", async () => {
      verify.disabled = true;
      try {
        const exact = await state.client.exactQuery(sketch.dataset_id, sketch.attribute, [
          ...node.clauses,
        ]);
        caption.textContent += ` | exact: ${formatCompact(exact)}`;
      } catch (error) {
        alert(String(error));
      } finally {
        verify.disabled = false;
      }
    });
    box.append(verify);
  } else {
    const run = el("button", undefined, "run query") as HTMLButtonElement;
    run.type = "button";
    run.disabled = false;
    run.addEventListener("click", async () => {
      run.disabled = true; // one in-flight query per node
      try {
        node.answer = await state.client.querySketch(sketch.id, [...node.clauses]);
        onChanged();
      } catch (error) {
        run.disabled = false;
        alert(String(error));
      }
    });
    box.append(run);
  }

  const verdicts = el("div", "verdicts");
  for (const verdict of ["unreviewed", "suspicious", "cleared"] as const) {
    const button = el("button", node.verdict === verdict ? "active" : "", verdict);
    button.type = "button";
    button.addEventListener("click", () => {
      node.setVerdict(verdict);
      onChanged();
    });
    verdicts.append(button);
  }
  box.append(verdicts);

  box.append(refineForm(node, state, onChanged));

  if (!node.collapsed) {
    const children = el("div", "children");
    for (const child of node.children) {
      children.append(renderNode(child, state, onChanged));
    }
    box.append(children);
  }
  return box;
}

function refineForm(
  node: DrillDownNode,
  state: AppState,
  onChanged: () => void,
): HTMLElement {
  const form = el("form", "refine");
  const attr = el("select");
  for (const attribute of state.dataset?.attributes ?? []) {
    const option = el("option", undefined, attribute.name);
    option.value = attribute.name;
    attr.append(option);
  }
  const op = el("select");
  for (const value of ["=", "!=", "<", "<=", ">", ">="] as const) {
    const option = el("option", undefined, value);
    option.value = value;
    op.append(option);
  }
  const literal = numberInput("");
  literal.placeholder = "value";
  const add = el("button", undefined, "drill down") as HTMLButtonElement;
  add.type = "submit";
  form.append(attr, op, literal, add);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const raw = literal.value.trim();
    if (!raw) return;
    const numeric = Number(raw);
    const clause: ClauseJson = {
      attribute: attr.value,
      op: op.value as ComparatorOp,
      value: Number.isFinite(numeric) && raw !== "" && !isKindCategorical(state, attr.value)
        ? numeric
        : raw,
    };
    node.refine([clause]);
    onChanged();
  });
  return form;
}

function isKindCategorical(state: AppState, attribute: string): boolean {
  return (
    state.dataset?.attributes.find((a) => a.name === attribute)?.kind === "categorical"
  );
}

function describeClauses(clauses: ClauseJson[]): string {
  return clauses
    .map((c) =>
      c.op === "in"
        ? `${c.attribute} IN (${(c.value as unknown[]).join(", ")})`
        : c.op === "between"
          ? `${c.attribute} BETWEEN ${(c.value as unknown[]).join(" AND ")}`
          : `${c.attribute} ${c.op} ${c.value}`,
    )
    .join(" AND ");
}

// ------------------------------------------------------------------ stats view

export function renderStats(container: HTMLElement, stats: SketchStats | null): void {
  container.replaceChildren();
  if (!stats) {
    container.append(el("p", "hint", "No summary yet."));
    return;
  }
  const table = el("table", "stats-table");
  const head = el("tr");
  for (const column of [
    `${stats.attribute} value`,
    "distinct tuples selected",
    "bag mass",
    "Fr",
    "tuples with Fr",
  ]) {
    head.append(el("th", undefined, column));
  }
  table.append(head);
  for (const block of stats.blocks) {
    block.frequencies.forEach((bucket, index) => {
      const row = el("tr", index === 0 ? "block-start" : "");
      if (index === 0) {
        row.append(
          spanned(el("td", undefined, formatCompact(block.value)), block.frequencies.length),
          spanned(el("td", undefined, String(block.distinct)), block.frequencies.length),
          spanned(el("td", undefined, String(block.bag_mass)), block.frequencies.length),
        );
      }
      row.append(el("td", undefined, String(bucket.fr)));
      row.append(el("td", undefined, String(bucket.count)));
      table.append(row);
    });
  }
  const footer = el(
    "div",
    "stats-footer",
    `frequency-weighted total = ${stats.frequency_mass} (b = ${stats.b})`,
  );
  container.append(table, footer);
}

function spanned(cell: HTMLTableCellElement, rows: number): HTMLTableCellElement {
  cell.rowSpan = rows;
  return cell;
}
