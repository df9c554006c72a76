/* tslint:disable */
/* eslint-disable */

/**
 * Spectral closeness and Calderón block norms for two factors.
 */
export function compare_factors(coeffs: Float64Array, coeffs_tilde: Float64Array, n: number, m_max: number): string;

/**
 * Müntz exponents, Blaschke index and coefficient row sums.
 */
export function muntz_table(n: number, m0: number, m_max: number): string;

/**
 * Steklov eigenvalue pairs (λ⁻, λ⁺) per sphere mode.
 */
export function spectrum(coeffs: Float64Array, n: number, omega: number, m_max: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compare_factors: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly muntz_table: (a: number, b: number, c: number) => [number, number, number, number];
    readonly spectrum: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
