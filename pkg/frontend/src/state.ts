/** View state and its invariants: at most one pending mutation, selected
 * series keys always a subset of what the series endpoint returned. */

export const KINDS = ["Patient", "Observation", "Encounter", "DocumentReference"] as const;
export type Kind = (typeof KINDS)[number];

export interface ViewState {
  datasetId: string | null;
  activeKind: Kind;
  offset: number;
  limit: number;
  availableKeys: string[];
  selectedKeys: string[];
  pending: boolean;
}

export function initialState(): ViewState {
  return {
    datasetId: null,
    activeKind: "Patient",
    offset: 0,
    limit: 100,
    availableKeys: [],
    selectedKeys: [],
    pending: false,
  };
}

export function beginOperation(state: ViewState): ViewState {
  if (state.pending) throw new Error("an ingest or fetch is already in flight");
  return { ...state, pending: true };
}

export function operationFailed(state: ViewState): ViewState {
  return { ...state, pending: false };
}

export function datasetLoaded(state: ViewState, datasetId: string, availableKeys: string[]): ViewState {
  return {
    ...state,
    pending: false,
    datasetId,
    activeKind: "Patient",
    offset: 0,
    availableKeys: [...availableKeys],
    // a fresh dataset invalidates any previous selection
    selectedKeys: [],
  };
}

export function selectTab(state: ViewState, kind: Kind): ViewState {
  return { ...state, activeKind: kind, offset: 0 };
}

export function setPage(state: ViewState, offset: number, total: number): ViewState {
  const bounded = Math.max(0, Math.min(offset, Math.max(0, total - 1)));
  return { ...state, offset: bounded - (bounded % state.limit) };
}

export function toggleSeries(state: ViewState, keyId: string): ViewState {
  if (!state.availableKeys.includes(keyId)) return state;
  const selected = state.selectedKeys.includes(keyId)
    ? state.selectedKeys.filter((k) => k !== keyId)
    : [...state.selectedKeys, keyId];
  return { ...state, selectedKeys: selected };
}
