/* tslint:disable */
/* eslint-disable */

/**
 * GDV of the classifier token, probe accuracy for `role`, and the MDS map
 * of the classifier token at `layer`.
 */
export function layer_view(seed: number, layer: number, role: string): string;

/**
 * Run `query` over `tagged`, written as `word/TAG word/TAG ...`.
 */
export function match_query(query: string, dialect: string, tagged: string, max_gap: number): string;

/**
 * t-SNE map of the classifier token at `layer`.
 */
export function tsne_view(seed: number, layer: number, perplexity: number, iterations: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly layer_view: (a: number, b: number, c: number, d: number) => [number, number];
    readonly match_query: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly tsne_view: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
