/* tslint:disable */
/* eslint-disable */

/**
 * Valence/arousal points of every rated record, each flagged by whether it
 * falls inside the box.
 */
export function box_filter(taxonomy_text: string, corpus_text: string, valence_lo: number, valence_hi: number, arousal_lo: number, arousal_hi: number): string;

/**
 * Scores a concept pair under every measure. Lexical measures compare the
 * lower-cased concept names.
 */
export function compare_measures(taxonomy_text: string, a: string, b: string): string;

/**
 * Sample inputs for the page: `{taxonomy, corpus, concepts}`.
 */
export function demo_workspace(): string;

/**
 * Lift curve of a relevance pattern such as `"TFTF"` (also `1`/`0`,
 * whitespace ignored), with the selected threshold and its precision.
 */
export function lift_curve(pattern: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly box_filter: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number];
    readonly compare_measures: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly demo_workspace: () => [number, number];
    readonly lift_curve: (a: number, b: number) => [number, number];
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
