import { httpApi } from "./api";
import { ReshapeController, type ControllerView } from "./controller";
import { dragFraction, overlayStyle, splitLayout } from "./compare";
import { NoticeList } from "./notices";

const imageInput = document.querySelector<HTMLInputElement>("#image-file")!;
const keypointInput = document.querySelector<HTMLInputElement>("#keypoint-file")!;
const uploadButton = document.querySelector<HTMLButtonElement>("#upload")!;
const slider = document.querySelector<HTMLInputElement>("#mu")!;
const muReadout = document.querySelector<HTMLSpanElement>("#mu-value")!;
const compareEl = document.querySelector<HTMLDivElement>("#compare")!;
const beforeClip = document.querySelector<HTMLDivElement>("#before-clip")!;
const beforeImg = document.querySelector<HTMLImageElement>("#before-img")!;
const afterImg = document.querySelector<HTMLImageElement>("#after-img")!;
const divider = document.querySelector<HTMLDivElement>("#divider")!;
const overlayImg = document.querySelector<HTMLImageElement>("#overlay-img")!;
const overlayToggle = document.querySelector<HTMLInputElement>("#overlay-toggle")!;
const noticesEl = document.querySelector<HTMLUListElement>("#notices")!;

const notices = new NoticeList();
notices.onChange = renderNotices;

function renderNotices(): void {
  noticesEl.replaceChildren(
    ...notices.items.map((notice) => {
      const li = document.createElement("li");
      li.className = "notice";
      const text = document.createElement("span");
      text.textContent = notice.message;
      const dismiss = document.createElement("button");
      dismiss.textContent = "×";
      dismiss.title = "Dismiss";
      dismiss.addEventListener("click", () => notices.dismiss(notice.id));
      li.append(text, dismiss);
      return li;
    }),
  );
}

// object URLs need explicit revocation; track one per <img> slot
const urls = new Map<HTMLImageElement, string>();
function setImage(img: HTMLImageElement, blob: Blob): void {
  const old = urls.get(img);
  if (old) URL.revokeObjectURL(old);
  const url = URL.createObjectURL(blob);
  urls.set(img, url);
  img.src = url;
}

const view: ControllerView = {
  showOriginal(image) {
    setImage(beforeImg, image);
    setImage(afterImg, image);
    slider.value = "0";
    muReadout.textContent = "0.00";
    overlayToggle.checked = false;
    applyOverlay(false);
    compareEl.classList.remove("empty");
  },
  showResult(image) {
    // pixels go straight from the service response to the screen
    setImage(afterImg, image);
  },
  notify(message) {
    notices.push(message);
  },
};

const controller = new ReshapeController(httpApi(), view);

uploadButton.addEventListener("click", () => {
  const image = imageInput.files?.[0];
  const keypoints = keypointInput.files?.[0];
  if (!image || !keypoints) {
    notices.push("Choose both an image and a keypoint JSON file first.");
    return;
  }
  uploadButton.disabled = true;
  void controller.openSession(image, keypoints).finally(() => {
    uploadButton.disabled = false;
  });
});

slider.addEventListener("input", () => {
  const mu = Number.parseFloat(slider.value);
  muReadout.textContent = mu.toFixed(2);
  controller.setMu(mu);
});

// --- before/after divider -------------------------------------------------

let fraction = 0.5;

function applySplit(): void {
  const { beforeClipPx, dividerPx } = splitLayout(compareEl.clientWidth, fraction);
  beforeClip.style.width = `${beforeClipPx}px`;
  divider.style.left = `${dividerPx}px`;
}

divider.addEventListener("pointerdown", (down) => {
  down.preventDefault();
  divider.setPointerCapture(down.pointerId);
  const move = (ev: PointerEvent) => {
    const rect = compareEl.getBoundingClientRect();
    fraction = dragFraction(rect.left, rect.width, ev.clientX);
    applySplit();
  };
  const up = () => {
    divider.removeEventListener("pointermove", move);
    divider.removeEventListener("pointerup", up);
  };
  divider.addEventListener("pointermove", move);
  divider.addEventListener("pointerup", up);
});

new ResizeObserver(applySplit).observe(compareEl);
applySplit();

// --- flow overlay -----------------------------------------------------------

function applyOverlay(enabled: boolean): void {
  const style = overlayStyle(enabled);
  overlayImg.style.display = style.display;
  overlayImg.style.opacity = String(style.opacity);
}

overlayToggle.addEventListener("change", () => {
  if (!overlayToggle.checked) {
    applyOverlay(false);
    return;
  }
  void controller.loadFlowOverlay().then((blob) => {
    if (blob) {
      setImage(overlayImg, blob);
      applyOverlay(true);
    } else {
      overlayToggle.checked = false;
    }
  });
});
