import { SessionClient } from "./api.js";
import { ViewerUI } from "./ui.js";

function need<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

async function boot(): Promise<void> {
  const base = window.location.origin;
  const client = new SessionClient(base);
  const ui = new ViewerUI(client, {
    frame: need<HTMLImageElement>("frame"),
    controls: need("controls"),
    status: need("status"),
    lightSelect: need<HTMLSelectElement>("light-select"),
    sweepButton: need<HTMLButtonElement>("sweep-button"),
    sweepStrip: need("sweep-strip"),
  });
  try {
    await ui.start();
  } catch (err) {
    need("status").textContent =
      `cannot reach the avatar server: ${(err as Error).message}`;
    need("status").classList.add("error");
  }
}

void boot();
