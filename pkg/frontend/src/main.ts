/* DOM wiring for the explorer: login, tree, panes, controls. */

import { ApiClient, ApiError, CellsResponse, CuboidInfo, TreeNode } from "./api.js";
import { histogramSvg, pieSvg, scatterPoints, scatterSvg } from "./charts.js";
import { cellTableHtml, clusteringModel, clusterTableHtml, explorationModel,
         pieEntries, regressionModel, regressionTableHtml, rollupModel,
         rollupTableHtml } from "./panes.js";
import { decodeHash, encodeHash, ViewState, withoutSlice, withSlice } from "./state.js";
import { cuboidLeaves, ExpansionSet, flattenTree, toggle, treeHtml } from "./tree.js";

const api = new ApiClient("");
let state: ViewState = decodeHash(location.hash);
let expanded: ExpansionSet = new Set(["TourismDC"]);
let treeRoots: TreeNode[] = [];
let cuboidInfo: CuboidInfo[] = [];

const el = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
};

function banner(message: string | null): void {
  const box = el("banner");
  box.textContent = message ?? "";
  box.style.display = message ? "block" : "none";
}

function paneError(id: string, err: unknown): void {
  const box = el(id);
  const detail = err instanceof ApiError ? err.detail : String(err);
  box.innerHTML = `<p class="error">${detail.replace(/</g, "&lt;")}</p>`;
}

function setSnapshot(snapshot: number): void {
  el("snapshot").textContent = `snapshot ${snapshot}`;
}

function pushState(): void {
  history.replaceState(null, "", encodeHash(state) || "#");
}

// -- login -------------------------------------------------------------------

async function doLogin(): Promise<void> {
  const token = (el("token") as HTMLInputElement).value;
  try {
    const doc = await api.login(token);
    setSnapshot(doc.snapshot);
    el("login").style.display = "none";
    el("app").style.display = "grid";
    await refreshTree();
    if (state.cuboid) await openCuboid(state.cuboid);
  } catch (err) {
    paneError("login-error", err);
  }
}

// -- tree --------------------------------------------------------------------

async function refreshTree(): Promise<void> {
  try {
    const [treeDoc, cuboidsDoc] = await Promise.all([api.tree(), api.cuboids()]);
    treeRoots = treeDoc.tree;
    cuboidInfo = cuboidsDoc.cuboids;
    setSnapshot(treeDoc.snapshot);
    renderTree();
    banner(null);
  } catch (err) {
    banner(`tree load failed: ${err instanceof ApiError ? err.detail : err} `);
    el("banner").insertAdjacentHTML("beforeend", `<button id="retry">retry</button>`);
    el("retry").onclick = () => void refreshTree();
  }
}

function renderTree(): void {
  el("tree").innerHTML = treeHtml(flattenTree(treeRoots, expanded));
  for (const row of document.querySelectorAll<HTMLElement>("#tree .tree-row")) {
    row.onclick = () => {
      const path = row.dataset["path"]!;
      if (row.dataset["kind"] === "cuboid") {
        void openCuboid(row.dataset["label"]!);
      } else {
        expanded = toggle(expanded, path);
        renderTree();
      }
    };
  }
  const leaves = cuboidLeaves(treeRoots);
  el("tree-note").textContent = `${leaves.length} cuboids`;
}

// -- exploration -------------------------------------------------------------

async function openCuboid(name: string): Promise<void> {
  if (state.cuboid !== name) {
    state = { ...state, cuboid: name, slices: [] };
  }
  pushState();
  el("pane-title").textContent = name;
  const info = cuboidInfo.find((c) => c.name === name);
  if (info && !info.built) {
    el("cells").innerHTML =
      `<p class="empty">Cuboid not built yet.</p><button id="build-btn">Build</button>`;
    el("build-btn").onclick = () => void buildAndReload(name);
    ["histogram", "pie", "scatter", "cluster-table", "regress-table", "rollup-table"]
      .forEach((id) => (el(id).innerHTML = ""));
    return;
  }
  await loadCells(name);
}

async function buildAndReload(name: string): Promise<void> {
  try {
    const doc = await api.build(name, { k: state.k, seed: state.seed });
    setSnapshot(doc.snapshot as number);
    await api.cuboids().then((d) => (cuboidInfo = d.cuboids));
    await loadCells(name);
  } catch (err) {
    paneError("cells", err);
  }
}

async function loadCells(name: string): Promise<void> {
  let response: CellsResponse;
  try {
    response = await api.cells(name, state.slices);
  } catch (err) {
    paneError("cells", err);
    return;
  }
  setSnapshot(response.snapshot);
  const model = explorationModel(response);
  el("cells").innerHTML = cellTableHtml(model);
  el("histogram").innerHTML = histogramSvg(model.cellSizes);

  const dimSelect = el("pie-dim") as HTMLSelectElement;
  dimSelect.innerHTML = model.dims.map((d) => `<option>${d}</option>`).join("");
  const renderPie = () =>
    (el("pie").innerHTML = pieSvg(pieEntries(response.cells, dimSelect.value)));
  dimSelect.onchange = renderPie;
  if (model.dims.length) renderPie();

  renderSliceControls(name, model.dims);
  await renderScatter(name);
}

function renderSliceControls(name: string, dims: string[]): void {
  const box = el("slices");
  const active = state.slices
    .map((s) => `<span class="chip slice-chip" data-dim="${s.dim}">${s.dim}=${s.member} ✕</span>`)
    .join(" ");
  box.innerHTML =
    `${active} <select id="slice-dim">${dims.map((d) => `<option>${d}</option>`).join("")}</select>` +
    `<input id="slice-member" placeholder="member"/> <button id="slice-add">slice</button>`;
  for (const chip of box.querySelectorAll<HTMLElement>(".slice-chip")) {
    chip.onclick = () => {
      state = withoutSlice(state, chip.dataset["dim"]!);
      pushState();
      void loadCells(name);
    };
  }
  el("slice-add").onclick = () => {
    const dim = (el("slice-dim") as HTMLSelectElement).value;
    const member = (el("slice-member") as HTMLInputElement).value;
    if (dim && member) {
      state = withSlice(state, dim, member);
      pushState();
      void loadCells(name);
    }
  };
}

async function renderScatter(name: string): Promise<void> {
  try {
    const doc = await api.exportCube(name);
    const clustered = doc.cube.cells.find((c) => c.clustering);
    if (!clustered?.clustering) {
      el("scatter").innerHTML = "<p class='empty'>no clustered cell</p>";
      return;
    }
    const cols = clustered.clustering.feature_columns;
    const x = cols[0] ?? "";
    const y = cols[1] ?? cols[0] ?? "";
    const points = scatterPoints(clustered.clustering, x, y);
    el("scatter").innerHTML = scatterSvg(points, x, y);
  } catch (err) {
    paneError("scatter", err);
  }
}

// -- analysis panes ----------------------------------------------------------

async function runCluster(): Promise<void> {
  const cuboid = state.cuboid;
  if (!cuboid) return;
  state = { ...state, k: Number((el("k") as HTMLInputElement).value) || 3,
            seed: Number((el("seed") as HTMLInputElement).value) || 0 };
  pushState();
  try {
    const doc = await api.cluster(cuboid, state.k, state.seed);
    setSnapshot(doc.snapshot);
    el("cluster-table").innerHTML = clusterTableHtml(clusteringModel(doc.cells));
    await loadCells(cuboid); // updated SSE and colors feed exploration
  } catch (err) {
    paneError("cluster-table", err);
  }
}

async function runRegress(): Promise<void> {
  const cuboid = state.cuboid;
  if (!cuboid) return;
  const target = (el("target") as HTMLInputElement).value;
  const lambda = Number((el("lambda") as HTMLInputElement).value) || 0;
  state = { ...state, target: target || null, lambda };
  pushState();
  if (!target) {
    paneError("regress-table", new ApiError(0, "choose a target attribute"));
    return;
  }
  try {
    const doc = await api.regress(cuboid, target, lambda);
    setSnapshot(doc.snapshot);
    el("regress-table").innerHTML =
      regressionTableHtml(regressionModel(doc.cells, doc.overall));
  } catch (err) {
    paneError("regress-table", err);
  }
}

async function runRollup(): Promise<void> {
  const cuboid = state.cuboid;
  if (!cuboid) return;
  const dim = (el("rollup-dim") as HTMLInputElement).value;
  if (!dim) return;
  try {
    const doc = await api.rollup(cuboid, dim, "merge_stats");
    setSnapshot(doc.snapshot);
    el("rollup-table").innerHTML = rollupTableHtml(rollupModel(doc));
  } catch (err) {
    paneError("rollup-table", err);
  }
}

// -- boot --------------------------------------------------------------------

export function boot(): void {
  el("login-btn").onclick = () => void doLogin();
  (el("token") as HTMLInputElement).onkeydown = (e) => {
    if (e.key === "Enter") void doLogin();
  };
  el("cluster-btn").onclick = () => void runCluster();
  el("regress-btn").onclick = () => void runRegress();
  el("rollup-btn").onclick = () => void runRollup();
  (el("k") as HTMLInputElement).value = String(state.k);
  (el("seed") as HTMLInputElement).value = String(state.seed);
  if (state.target) (el("target") as HTMLInputElement).value = state.target;
  if (state.lambda) (el("lambda") as HTMLInputElement).value = String(state.lambda);
}

if (typeof document !== "undefined" && document.getElementById("login-btn")) {
  boot();
}
