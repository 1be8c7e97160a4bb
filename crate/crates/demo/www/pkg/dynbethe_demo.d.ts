/* tslint:disable */
/* eslint-disable */

export class DetectionView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * The negative eigenvalues used for the embedding (empty in fast mode).
     */
    eigenvalues(): Float64Array;
    /**
     * Estimated labels, snapshot-major.
     */
    estimate(): Uint32Array;
    overlaps(): Float64Array;
    /**
     * Planted labels, snapshot-major.
     */
    truth(): Uint32Array;
    readonly n: number;
}

export class Spectrum {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Interleaved `re, im` pairs of every eigenvalue.
     */
    eigenvalues(): Float64Array;
    /**
     * Interleaved `re, im` pairs of the predicted outliers.
     */
    predicted(): Float64Array;
    readonly bulk_radius: number;
}

/**
 * Full spectrum of the weighted non-backtracking operator on a sampled
 * graph, with the predicted outlier positions for the same model.
 */
export function nb_spectrum(n: number, t: number, c: number, eta: number, alpha_ratio: number, xi: number, h: number, seed: bigint): Spectrum;

/**
 * Samples a planted model and runs detection with the planted `eta`.
 */
export function run_detection(n: number, t: number, eta: number, alpha_ratio: number, fast: boolean, seed: bigint): DetectionView;

/**
 * `alpha_c(T, eta)` on `points` evenly spaced values of `eta` in `[0, 1]`.
 * `t = 0` stands for an infinite horizon.
 */
export function threshold_curve(t: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_detectionview_free: (a: number, b: number) => void;
    readonly __wbg_spectrum_free: (a: number, b: number) => void;
    readonly detectionview_eigenvalues: (a: number) => [number, number];
    readonly detectionview_estimate: (a: number) => [number, number];
    readonly detectionview_n: (a: number) => number;
    readonly detectionview_overlaps: (a: number) => [number, number];
    readonly detectionview_truth: (a: number) => [number, number];
    readonly nb_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
    readonly run_detection: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly spectrum_bulk_radius: (a: number) => number;
    readonly spectrum_eigenvalues: (a: number) => [number, number];
    readonly spectrum_predicted: (a: number) => [number, number];
    readonly threshold_curve: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
