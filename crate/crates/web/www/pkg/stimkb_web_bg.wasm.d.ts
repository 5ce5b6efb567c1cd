/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const box_filter: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number];
export const compare_measures: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const demo_workspace: () => [number, number];
export const lift_curve: (a: number, b: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
