/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const bspline_curves: (a: number, b: number, c: number) => [number, number, number, number];
export const conv_flops: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const demo_last_async_flops: (a: number) => number;
export const demo_last_dense_flops: (a: number) => number;
export const demo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const demo_nodes: (a: number) => [number, number];
export const demo_num_nodes: (a: number) => number;
export const demo_ratio: (a: number) => number;
export const demo_remaining: (a: number) => number;
export const demo_scores: (a: number) => [number, number];
export const demo_step: (a: number) => [number, number, number];
export const demo_written: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
