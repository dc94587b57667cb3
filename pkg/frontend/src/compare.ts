/**
 * Before/after split-view geometry, kept as pure functions so the
 * divider math is testable without a DOM. The "before" image sits in a
 * clipping wrapper whose width tracks the divider; both images are the
 * same size and share the same left edge, so the seam is a true split of
 * one aligned pair rather than two images side by side.
 */

export interface SplitLayout {
  /** Width in px of the visible "before" strip (the clip wrapper). */
  beforeClipPx: number;
  /** Divider handle position in px from the container's left edge. */
  dividerPx: number;
}

export function clampFraction(fraction: number): number {
  if (!Number.isFinite(fraction)) return 0.5;
  return Math.min(1, Math.max(0, fraction));
}

/** Divider fully left (fraction 0) shows only the "after" image. */
export function splitLayout(containerWidth: number, fraction: number): SplitLayout {
  const f = clampFraction(fraction);
  const x = Math.round(containerWidth * f);
  return { beforeClipPx: x, dividerPx: x };
}

/** Pointer position -> divider fraction while dragging. */
export function dragFraction(
  containerLeft: number,
  containerWidth: number,
  pointerX: number,
): number {
  if (containerWidth <= 0) return 0.5;
  return clampFraction((pointerX - containerLeft) / containerWidth);
}

/** Flow overlay is a fixed 50% alpha blend when enabled, hidden otherwise. */
export const OVERLAY_ALPHA = 0.5;

export interface OverlayStyle {
  display: "block" | "none";
  opacity: number;
}

export function overlayStyle(enabled: boolean): OverlayStyle {
  return enabled
    ? { display: "block", opacity: OVERLAY_ALPHA }
    : { display: "none", opacity: OVERLAY_ALPHA };
}
