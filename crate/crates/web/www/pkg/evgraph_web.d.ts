/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    last_async_flops(): number;
    last_dense_flops(): number;
    /**
     * Generates a mixed stream of `count` events on a `side` x `side` sensor
     * and densely initializes on the first `init` of them.
     */
    constructor(side: number, count: number, init: number, seed: bigint);
    /**
     * Interleaved `x, y, polarity` per node.
     */
    nodes(): Float64Array;
    num_nodes(): number;
    /**
     * Cumulative async / dense operation ratio since construction.
     */
    ratio(): number;
    remaining(): number;
    scores(): Float64Array;
    /**
     * Inserts the next event. Returns false once the stream is exhausted.
     */
    step(): boolean;
    /**
     * Nodes rewritten in the first layer by the last step.
     */
    written(): Uint32Array;
}

/**
 * Samples every per-axis basis function at `samples` evenly spaced points;
 * row-major `[basis][sample]`.
 */
export function bspline_curves(degree: number, kernel_size: number, samples: number): Float64Array;

/**
 * Per-node spline convolution cost for a 3-D kernel.
 */
export function conv_flops(neighbors: number, m_in: number, m_out: number, kernel_size: number, degree: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly bspline_curves: (a: number, b: number, c: number) => [number, number, number, number];
    readonly conv_flops: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly demo_last_async_flops: (a: number) => number;
    readonly demo_last_dense_flops: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly demo_nodes: (a: number) => [number, number];
    readonly demo_num_nodes: (a: number) => number;
    readonly demo_ratio: (a: number) => number;
    readonly demo_remaining: (a: number) => number;
    readonly demo_scores: (a: number) => [number, number];
    readonly demo_step: (a: number) => [number, number, number];
    readonly demo_written: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
