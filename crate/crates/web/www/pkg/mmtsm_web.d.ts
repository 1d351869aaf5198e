/* tslint:disable */
/* eslint-disable */

/**
 * Names of the synthetic motion classes, in label order.
 */
export function class_names(): string[];

/**
 * Renders one synthetic clip as consecutive RGBA frames of
 * `CLIP_SIZE x CLIP_SIZE` pixels. `modality` is `rgb`, `tir` or `depth`.
 */
export function render_clip(label: number, frames: number, seed: bigint, modality: string): Uint8Array;

/**
 * Frame indices chosen for a clip of `frames` frames, flattened view by
 * view (each view has `segments` entries). `mode` is `random`, `center`
 * or `dense`.
 */
export function sample_frames(frames: number, segments: number, mode: string, passes: number, seed: bigint): Uint32Array;

/**
 * For every (channel, segment) cell, the segment the shifted feature is
 * read from, or -1 where zero padding enters. Row-major over channels.
 */
export function shift_sources(segments: number, channels: number, fold_div: number): Int32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly class_names: () => [number, number];
    readonly render_clip: (a: number, b: number, c: bigint, d: number, e: number) => [number, number, number, number];
    readonly sample_frames: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly shift_sources: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
