/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const bundled_designs: () => [number, number];
export const loss_curve: (a: number, b: number, c: number) => [number, number];
export const sample_teacher: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number];
export const simulate: (a: number, b: number, c: number, d: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
