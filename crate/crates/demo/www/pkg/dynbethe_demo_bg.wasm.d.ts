/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_detectionview_free: (a: number, b: number) => void;
export const __wbg_spectrum_free: (a: number, b: number) => void;
export const detectionview_eigenvalues: (a: number) => [number, number];
export const detectionview_estimate: (a: number) => [number, number];
export const detectionview_n: (a: number) => number;
export const detectionview_overlaps: (a: number) => [number, number];
export const detectionview_truth: (a: number) => [number, number];
export const nb_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
export const run_detection: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const spectrum_bulk_radius: (a: number) => number;
export const spectrum_eigenvalues: (a: number) => [number, number];
export const spectrum_predicted: (a: number) => [number, number];
export const threshold_curve: (a: number, b: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
