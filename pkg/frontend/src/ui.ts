/**
 * Control panel wiring: sliders post debounced param updates and refresh
 * the frame; the frame image is swapped only when a newer render arrives.
 */

import { Debouncer, SessionClient } from "./api.js";
import { SessionState } from "./state.js";

interface SliderSpec {
  label: string;
  path: string;
  min: number;
  max: number;
  step: number;
  get: (s: SessionState) => number;
}

function sliderSpecs(state: SessionState): SliderSpec[] {
  const specs: SliderSpec[] = [];
  const nExpr = Math.min(state.expression.length, 6);
  for (let i = 0; i < nExpr; i++) {
    specs.push({
      label: i === 0 ? "expr jaw-open" : i === 1 ? "expr blink" : `expr ${i}`,
      path: `expression.${i}`,
      min: -1, max: 1.5, step: 0.01,
      get: (s) => s.expression[i],
    });
  }
  const jaw = Math.min(2, state.pose.length - 1);
  specs.push({
    label: "jaw hinge", path: `pose.${jaw}.0`, min: 0, max: 0.5, step: 0.005,
    get: (s) => s.pose[jaw][0],
  });
  specs.push({
    label: "head yaw", path: "pose.0.1", min: -0.8, max: 0.8, step: 0.01,
    get: (s) => s.pose[0][1],
  });
  specs.push({
    label: "head pitch", path: "pose.0.0", min: -0.5, max: 0.5, step: 0.01,
    get: (s) => s.pose[0][0],
  });
  specs.push({
    label: "orbit azimuth", path: "orbit.azimuth",
    min: -Math.PI, max: Math.PI, step: 0.01, get: (s) => s.orbit.azimuth,
  });
  specs.push({
    label: "orbit elevation", path: "orbit.elevation",
    min: -1.2, max: 1.2, step: 0.01, get: (s) => s.orbit.elevation,
  });
  specs.push({
    label: "orbit distance", path: "orbit.distance",
    min: 0.2, max: 1.2, step: 0.005, get: (s) => s.orbit.distance,
  });
  specs.push({
    label: "env yaw", path: "env_yaw", min: 0, max: 2 * Math.PI, step: 0.01,
    get: (s) => s.env_yaw,
  });
  specs.push({
    label: "reflectance scale", path: "f0_scale", min: 0, max: 5, step: 0.05,
    get: (s) => s.f0_scale,
  });
  specs.push({
    label: "roughness scale", path: "roughness_scale",
    min: 0.2, max: 2, step: 0.02, get: (s) => s.roughness_scale,
  });
  specs.push({
    label: "exposure", path: "exposure", min: 0.1, max: 4, step: 0.05,
    get: (s) => s.exposure,
  });
  return specs;
}

export interface ViewerDom {
  frame: HTMLImageElement;
  controls: HTMLElement;
  status: HTMLElement;
  lightSelect: HTMLSelectElement;
  sweepButton: HTMLButtonElement;
  sweepStrip: HTMLElement;
}

export class ViewerUI {
  private debouncer = new Debouncer(100);
  private frameUrl: string | null = null;

  constructor(
    private readonly client: SessionClient,
    private readonly dom: ViewerDom,
  ) {}

  async start(): Promise<void> {
    const state = await this.client.connect();
    this.buildLightPicker();
    this.buildSliders(state);
    this.wireSweep();
    await this.showFrame();
    this.setStatus("connected");
  }

  private setStatus(text: string, isError = false): void {
    this.dom.status.textContent = text;
    this.dom.status.classList.toggle("error", isError);
  }

  private buildLightPicker(): void {
    for (const name of this.client.lights) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      this.dom.lightSelect.appendChild(opt);
    }
    this.dom.lightSelect.value = this.client.state.light;
    this.dom.lightSelect.addEventListener("change", () => {
      void this.apply("light", this.dom.lightSelect.value);
    });
  }

  private buildSliders(state: SessionState): void {
    for (const spec of sliderSpecs(state)) {
      const row = document.createElement("label");
      row.className = "control-row";
      const text = document.createElement("span");
      text.textContent = spec.label;
      const value = document.createElement("code");
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(spec.min);
      input.max = String(spec.max);
      input.step = String(spec.step);
      input.value = String(spec.get(state));
      value.textContent = Number(input.value).toFixed(2);
      input.addEventListener("input", () => {
        value.textContent = Number(input.value).toFixed(2);
        this.debouncer.push(() => {
          void this.apply(spec.path, Number(input.value));
        });
      });
      input.addEventListener("change", () => this.debouncer.flush());
      row.append(text, input, value);
      this.dom.controls.appendChild(row);
    }
  }

  private async apply(path: string, value: number | string): Promise<void> {
    try {
      await this.client.setParam(path, value);
      await this.showFrame();
      this.setStatus("ok");
    } catch (err) {
      // server errors come back verbatim; the session state is preserved
      this.setStatus(String((err as Error).message ?? err), true);
    }
  }

  private async showFrame(): Promise<void> {
    const frame = await this.client.refreshFrame();
    const blob = new Blob([frame.data], { type: "image/png" });
    const url = URL.createObjectURL(blob);
    if (this.frameUrl) URL.revokeObjectURL(this.frameUrl);
    this.frameUrl = url;
    this.dom.frame.src = url;
  }

  private wireSweep(): void {
    this.dom.sweepButton.addEventListener("click", () => {
      void this.runSweep();
    });
  }

  /** Reflectance sweep: comparison strip rendered left to right. */
  private async runSweep(): Promise<void> {
    this.setStatus("sweeping reflectance 1 to 3...");
    const start = this.client.state.f0_scale;
    try {
      const frames = await this.client.sweep("f0_scale", 1.0, 3.0, 5);
      this.dom.sweepStrip.replaceChildren();
      for (const f of frames) {
        const img = document.createElement("img");
        img.className = "sweep-cell";
        img.title = `f0_scale = ${f.state.f0_scale.toFixed(2)}`;
        img.src = URL.createObjectURL(
          new Blob([f.data], { type: "image/png" }),
        );
        this.dom.sweepStrip.appendChild(img);
      }
      await this.client.setParam("f0_scale", start);
      await this.showFrame();
      this.setStatus("sweep done");
    } catch (err) {
      this.setStatus(String((err as Error).message ?? err), true);
    }
  }
}
