import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api";
import { ReshapeController, clampMu } from "../src/controller";
import {
  FakeApi,
  ManualScheduler,
  RecordingView,
  blobBytes,
  fakeUpload,
  sameBytes,
  settle,
} from "./helpers";

const ORIGINAL = new Uint8Array([10, 20, 30, 40, 50, 60, 70, 80]);

function harness(autoResolve: boolean) {
  const api = new FakeApi(ORIGINAL, autoResolve);
  const view = new RecordingView();
  const scheduler = new ManualScheduler();
  const controller = new ReshapeController(api, view, scheduler);
  return { api, view, scheduler, controller };
}

async function opened(autoResolve: boolean) {
  const h = harness(autoResolve);
  const { image, keypoints } = fakeUpload(ORIGINAL);
  await h.controller.openSession(image, keypoints);
  return h;
}

describe("slider round trip", () => {
  it("mu 0 -> 1 -> 0 ends pixel-identical to the original", async () => {
    const { controller, scheduler, view } = await opened(true);
    const uploaded = await blobBytes(view.originals[0]!);

    controller.setMu(1);
    scheduler.flush();
    await settle();
    expect(sameBytes(await blobBytes(controller.displayedImage!), uploaded)).toBe(false);

    controller.setMu(0);
    scheduler.flush();
    await settle();

    expect(controller.displayedMu).toBe(0);
    const final = await blobBytes(controller.displayedImage!);
    expect(sameBytes(final, uploaded)).toBe(true);
    // the blob from the service was displayed as-is, not re-encoded
    expect(controller.displayedImage).toBe(view.results.at(-1)!.image);
  });

  it("shows the uploaded image itself at mu = 0 before any request", async () => {
    const { controller, view, api } = await opened(true);
    expect(controller.displayedMu).toBe(0);
    expect(view.originals).toHaveLength(1);
    expect(api.calls).toHaveLength(0);
    expect(sameBytes(await blobBytes(controller.displayedImage!), ORIGINAL)).toBe(true);
  });
});

describe("stale responses", () => {
  it("discards an older request that resolves after a newer one", async () => {
    const { controller, scheduler, api, view } = await opened(false);

    controller.setMu(0.5);
    scheduler.flush(); // request A leaves
    controller.setMu(1.0);
    scheduler.flush(); // request B leaves while A is still pending
    expect(api.calls.map((c) => c.mu)).toEqual([0.5, 1.0]);

    api.calls[1]!.resolve(new Blob([api.pixelsFor(1.0)]));
    await settle();
    expect(controller.displayedMu).toBe(1.0);

    // late arrival of the older request: must be dropped
    api.calls[0]!.resolve(new Blob([api.pixelsFor(0.5)]));
    await settle();
    expect(controller.displayedMu).toBe(1.0);
    expect(view.results).toHaveLength(1);
    expect(sameBytes(await blobBytes(view.results[0]!.image), api.pixelsFor(1.0))).toBe(true);
  });

  it("always displays the highest-sequence completed request", async () => {
    const { controller, scheduler, api, view } = await opened(false);

    for (const mu of [0.2, 0.4, 0.9]) {
      controller.setMu(mu);
      scheduler.flush();
    }
    const [a, b, c] = api.calls;
    b!.resolve(new Blob([api.pixelsFor(0.4)]));
    await settle();
    expect(controller.displayedMu).toBe(0.4);

    c!.resolve(new Blob([api.pixelsFor(0.9)]));
    await settle();
    expect(controller.displayedMu).toBe(0.9);

    a!.resolve(new Blob([api.pixelsFor(0.2)]));
    await settle();
    expect(controller.displayedMu).toBe(0.9);
    expect(view.results.map((r) => r.mu)).toEqual([0.4, 0.9]);
  });

  it("in-order completions display in order", async () => {
    const { controller, scheduler, api, view } = await opened(false);
    controller.setMu(0.3);
    scheduler.flush();
    controller.setMu(0.6);
    scheduler.flush();

    api.calls[0]!.resolve(new Blob([api.pixelsFor(0.3)]));
    await settle();
    api.calls[1]!.resolve(new Blob([api.pixelsFor(0.6)]));
    await settle();
    expect(view.results.map((r) => r.mu)).toEqual([0.3, 0.6]);
  });

  it("ignores responses from a replaced session", async () => {
    const { controller, scheduler, api, view } = await opened(false);
    controller.setMu(0.8);
    scheduler.flush();
    const orphan = api.calls[0]!;

    const { image, keypoints } = fakeUpload(ORIGINAL);
    await controller.openSession(image, keypoints);

    orphan.resolve(new Blob([api.pixelsFor(0.8)]));
    await settle();
    expect(view.results).toHaveLength(0);
    expect(controller.displayedMu).toBe(0);
  });
});

describe("debounce", () => {
  it("coalesces rapid slider movement into one request", async () => {
    const { controller, scheduler, api } = await opened(false);
    for (let i = 0; i <= 10; i++) controller.setMu(-1 + i * 0.2);
    expect(scheduler.queued).toBe(1);
    expect(scheduler.cancelled).toBe(10);

    scheduler.flush();
    expect(controller.sentCount).toBe(1);
    expect(controller.inFlight).toBe(1);
    expect(api.calls.map((c) => c.mu)).toEqual([1]); // the last position wins
  });

  it("sends nothing while the window is still open", async () => {
    const { controller, api } = await opened(false);
    controller.setMu(0.5);
    expect(controller.sentCount).toBe(0);
    expect(api.calls).toHaveLength(0);
  });

  it("does nothing before a session exists", () => {
    const { controller, scheduler } = harness(false);
    controller.setMu(0.5);
    expect(scheduler.queued).toBe(0);
    expect(controller.sentCount).toBe(0);
  });
});

describe("errors", () => {
  it("turns a failed reshape into a notice and keeps the last image", async () => {
    const { controller, scheduler, api, view } = await opened(false);
    controller.setMu(0.7);
    scheduler.flush();
    api.calls[0]!.reject(new ApiError(422, "mu must lie in [-1, 1]"));
    await settle();

    expect(view.messages).toEqual(["mu must lie in [-1, 1]"]);
    expect(controller.displayedMu).toBe(0); // still the original
    expect(controller.inFlight).toBe(0);
  });

  it("reports a failed upload and stays sessionless", async () => {
    const { controller, api, view, scheduler } = harness(false);
    api.failNextSession = new ApiError(400, "keypoints must be JSON");
    const { image, keypoints } = fakeUpload();

    const info = await controller.openSession(image, keypoints);
    expect(info).toBeNull();
    expect(controller.hasSession).toBe(false);
    expect(view.messages).toEqual(["keypoints must be JSON"]);

    controller.setMu(0.5);
    expect(scheduler.queued).toBe(0);
  });

  it("turns a failed overlay fetch into a notice", async () => {
    const { controller, api, view } = await opened(false);
    api.flowPng = () => Promise.reject(new ApiError(404, "no session"));

    expect(await controller.loadFlowOverlay()).toBeNull();
    expect(view.messages).toContain("no session");
    expect(controller.hasSession).toBe(true);
  });
});

describe("mu range", () => {
  it("clamps to [-1, 1]", () => {
    expect(clampMu(-3)).toBe(-1);
    expect(clampMu(2.4)).toBe(1);
    expect(clampMu(0.35)).toBe(0.35);
  });

  it("out-of-range slider values never reach the service", async () => {
    const { controller, scheduler, api } = await opened(false);
    controller.setMu(7);
    scheduler.flush();
    expect(api.calls.map((c) => c.mu)).toEqual([1]);
  });
});
