/* View state and its URL-hash serialization.
 *
 * A bookmarked hash restores the same cuboid, slice predicate and
 * analysis parameters; snapshot identifiers shown next to each pane come
 * from the responses themselves. */

export interface SlicePredicate {
  dim: string;
  member: string;
}

export interface ViewState {
  cuboid: string | null;
  slices: SlicePredicate[];
  k: number;
  seed: number;
  target: string | null;
  lambda: number;
}

export const DEFAULT_STATE: ViewState = {
  cuboid: null,
  slices: [],
  k: 3,
  seed: 7,
  target: null,
  lambda: 0,
};

export function encodeHash(state: ViewState): string {
  const params = new URLSearchParams();
  if (state.cuboid) params.set("cuboid", state.cuboid);
  for (const s of state.slices) params.append("slice", `${s.dim}:${s.member}`);
  if (state.k !== DEFAULT_STATE.k) params.set("k", String(state.k));
  if (state.seed !== DEFAULT_STATE.seed) params.set("seed", String(state.seed));
  if (state.target) params.set("target", state.target);
  if (state.lambda !== 0) params.set("lambda", String(state.lambda));
  const text = params.toString();
  return text ? `#${text}` : "";
}

export function decodeHash(hash: string): ViewState {
  const state: ViewState = { ...DEFAULT_STATE, slices: [] };
  const text = hash.startsWith("#") ? hash.slice(1) : hash;
  if (!text) return state;
  const params = new URLSearchParams(text);
  state.cuboid = params.get("cuboid");
  for (const raw of params.getAll("slice")) {
    const idx = raw.indexOf(":");
    if (idx > 0) state.slices.push({ dim: raw.slice(0, idx), member: raw.slice(idx + 1) });
  }
  const k = params.get("k");
  if (k !== null && Number.isFinite(Number(k))) state.k = Number(k);
  const seed = params.get("seed");
  if (seed !== null && Number.isFinite(Number(seed))) state.seed = Number(seed);
  state.target = params.get("target");
  const lambda = params.get("lambda");
  if (lambda !== null && Number.isFinite(Number(lambda))) state.lambda = Number(lambda);
  return state;
}

export function withSlice(state: ViewState, dim: string, member: string): ViewState {
  const slices = state.slices.filter((s) => s.dim !== dim).concat([{ dim, member }]);
  return { ...state, slices };
}

export function withoutSlice(state: ViewState, dim: string): ViewState {
  return { ...state, slices: state.slices.filter((s) => s.dim !== dim) };
}
