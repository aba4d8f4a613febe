import { ServiceClient } from "./api.js";
import { DEFAULT_EMPHASIS_THRESHOLD } from "./render_model.js";
import type { AppState } from "./views.js";
import { renderBuildPanel, renderDrillDown, renderStats } from "./views.js";

const DEFAULT_BASE_URL = "http://127.0.0.1:8331";

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function boot(): void {
  const state: AppState = {
    client: new ServiceClient(DEFAULT_BASE_URL),
    dataset: null,
    sketch: null,
    root: null,
    emphasisThreshold: DEFAULT_EMPHASIS_THRESHOLD,
  };

  const baseInput = byId<HTMLInputElement>("base-url");
  baseInput.value = DEFAULT_BASE_URL;
  baseInput.addEventListener("change", () => {
    state.client = new ServiceClient(baseInput.value);
  });

  const thresholdInput = byId<HTMLInputElement>("emphasis-threshold");
  thresholdInput.value = String(state.emphasisThreshold);
  thresholdInput.addEventListener("change", () => {
    const value = Number(thresholdInput.value);
    if (Number.isFinite(value) && value > 0 && value <= 1) {
      state.emphasisThreshold = value;
      refresh();
    }
  });

  const uploadForm = byId<HTMLFormElement>("upload-form");
  const fileInput = byId<HTMLInputElement>("csv-file");
  const datasetInfo = byId<HTMLDivElement>("dataset-info");
  uploadForm.addEventListener("submit", async (event) => {
    event.preventDefault();
    const file = fileInput.files?.[0];
    if (!file) return;
    try {
      state.dataset = await state.client.uploadDataset(await file.text(), file.name);
      state.sketch = null;
      state.root = null;
      datasetInfo.textContent =
        `dataset ${state.dataset.id}: n=${state.dataset.n}, attributes: ` +
        state.dataset.attributes.map((a) => `${a.name} (${a.kind})`).join(", ");
      refresh();
    } catch (error) {
      datasetInfo.textContent = String(error);
    }
  });

  const refresh = (): void => {
    renderBuildPanel(byId("build-panel"), state, async () => {
      refresh();
      await refreshStats();
    });
    renderDrillDown(byId("drilldown"), state, refresh);
  };

  const refreshStats = async (): Promise<void> => {
    if (!state.sketch) {
      renderStats(byId("stats"), null);
      return;
    }
    renderStats(byId("stats"), await state.client.sketchStats(state.sketch.id));
  };

  refresh();
  void refreshStats();
}

document.addEventListener("DOMContentLoaded", boot);
