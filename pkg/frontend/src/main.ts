/** Browser app: load an image + intrinsics, click labeled points, watch
 * the live cuboid from the solve service, iterate, export.
 */

import { SolveClient } from "./api.js";
import { GROUPS, TOOLS, toolSpec } from "./labels.js";
import { drawOverlay } from "./overlay.js";
import { Session } from "./session.js";
import type { AnnotationDocument, AnnotationLabel, Point2, SolveResponse } from "./types.js";

const client = new SolveClient(
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8711",
);
const session = new Session();

const canvas = document.getElementById("viewport") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const toolPalette = document.getElementById("tools")!;
const dofPanel = document.getElementById("dof")!;
const statusLine = document.getElementById("status")!;
const classPicker = document.getElementById("class-picker") as HTMLSelectElement;
const timerEl = document.getElementById("timer")!;

let image: HTMLImageElement | null = null;
// view transform: image coords -> canvas coords
let zoom = 1;
let panX = 0;
let panY = 0;

function canvasToImage(x: number, y: number): Point2 {
  return [(x - panX) / zoom, (y - panY) / zoom];
}

function render(): void {
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.setTransform(zoom, 0, 0, zoom, panX, panY);
  if (image) ctx.drawImage(image, 0, 0);
  const v = session.vehicle;
  if (v.lastResponse) {
    drawOverlay(ctx as unknown as import("./overlay.js").Canvas2D, v.lastResponse, v.annotations);
  } else if (v.annotations.length) {
    drawOverlay(
      ctx as unknown as import("./overlay.js").Canvas2D,
      { dof: { dof_available: 0, dof_needed: 8, status: "under-constrained" }, converged: false },
      v.annotations,
    );
  }
}

function describeDof(resp: SolveResponse | undefined): string {
  if (!resp) return "no solve yet";
  const d = resp.dof;
  const extra = resp.converged === false && resp.pose ? " (not converged)" : "";
  return `${d.status} — ${d.dof_available}/${d.dof_needed} DoF${extra}`;
}

async function resolveVehicle(): Promise<void> {
  if (!session.camera) {
    statusLine.textContent = "load camera intrinsics first";
    return;
  }
  const v = session.vehicle;
  if (!v.annotations.length) {
    v.lastResponse = undefined;
    render();
    return;
  }
  const t0 = performance.now();
  const resp = await client.solve(
    {
      camera: session.camera,
      vehicle: {
        id: v.id,
        annotations: v.annotations,
        prototype_class: v.prototypeClass,
      },
    },
    v.id,
  );
  if (resp === null) return; // superseded by a newer click
  session.recordResponse(resp);
  dofPanel.textContent = describeDof(resp);
  statusLine.textContent = `solve ${Math.round(performance.now() - t0)} ms`;
  render();
}

function buildPalette(): void {
  for (const group of GROUPS) {
    const box = document.createElement("fieldset");
    const legend = document.createElement("legend");
    legend.textContent = group;
    box.appendChild(legend);
    for (const tool of TOOLS.filter((t) => t.group === group)) {
      const btn = document.createElement("button");
      btn.textContent = `${tool.label} [${tool.shortcut}]`;
      btn.title = tool.hint;
      btn.dataset.label = tool.label;
      btn.addEventListener("click", () => selectTool(tool.label));
      box.appendChild(btn);
    }
    toolPalette.appendChild(box);
  }
}

function selectTool(label: AnnotationLabel): void {
  session.selectTool(label);
  for (const btn of toolPalette.querySelectorAll("button")) {
    btn.classList.toggle("active", btn.dataset.label === label);
  }
  statusLine.textContent = `tool: ${label} (${toolSpec(label).hint})`;
}

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const pt = canvasToImage(ev.clientX - rect.left, ev.clientY - rect.top);
  const completed = session.addClick(pt);
  render();
  if (completed) void resolveVehicle();
  else if (session.pending) statusLine.textContent = "second point…";
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const rect = canvas.getBoundingClientRect();
  const cx = ev.clientX - rect.left;
  const cy = ev.clientY - rect.top;
  const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
  panX = cx - (cx - panX) * factor;
  panY = cy - (cy - panY) * factor;
  zoom *= factor;
  render();
});

let dragging: Point2 | null = null;
canvas.addEventListener("mousedown", (ev) => {
  if (ev.button === 1 || ev.shiftKey) dragging = [ev.clientX - panX, ev.clientY - panY];
});
window.addEventListener("mouseup", () => (dragging = null));
window.addEventListener("mousemove", (ev) => {
  if (!dragging) return;
  panX = ev.clientX - dragging[0];
  panY = ev.clientY - dragging[1];
  render();
});

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  if (ev.key === "z" && (ev.ctrlKey || ev.metaKey)) {
    ev.preventDefault();
    if (session.undo()) void resolveVehicle();
    return;
  }
  const tool = TOOLS.find((t) => t.shortcut === ev.key);
  if (tool) selectTool(tool.label);
});

(document.getElementById("undo") as HTMLButtonElement).addEventListener("click", () => {
  if (session.undo()) void resolveVehicle();
});
(document.getElementById("accept") as HTMLButtonElement).addEventListener("click", () => {
  session.accept();
  statusLine.textContent = `vehicle accepted after ${session.elapsed().toFixed(1)} s`;
});
(document.getElementById("fail") as HTMLButtonElement).addEventListener("click", () => {
  session.markFailed();
  statusLine.textContent = "vehicle marked failed";
});
(document.getElementById("new-vehicle") as HTMLButtonElement).addEventListener("click", () => {
  session.addVehicle(classPicker.value || undefined);
  render();
});

classPicker.addEventListener("change", () => {
  session.vehicle.prototypeClass = classPicker.value || undefined;
  void resolveVehicle();
});

(document.getElementById("image-input") as HTMLInputElement).addEventListener("change", (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  const img = new Image();
  img.onload = () => {
    image = img;
    session.imageRef = file.name;
    zoom = Math.min(canvas.width / img.width, canvas.height / img.height);
    panX = panY = 0;
    render();
  };
  img.src = URL.createObjectURL(file);
});

(document.getElementById("camera-input") as HTMLInputElement).addEventListener("change", async (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  session.camera = JSON.parse(await file.text());
  statusLine.textContent = "camera loaded";
});

(document.getElementById("export") as HTMLButtonElement).addEventListener("click", () => {
  const doc = session.exportDocument();
  const blob = new Blob([JSON.stringify(doc, null, 2)], { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "annotations.json";
  a.click();
});

(document.getElementById("import-input") as HTMLInputElement).addEventListener("change", async (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  const doc = JSON.parse(await file.text()) as AnnotationDocument;
  const imported = Session.importDocument(doc);
  session.camera = imported.camera;
  session.vehicles = imported.vehicles;
  session.activeVehicle = 0;
  statusLine.textContent = `imported ${doc.vehicles.length} vehicle(s)`;
  void resolveVehicle();
});

setInterval(() => {
  timerEl.textContent = `${session.elapsed().toFixed(0)} s`;
}, 500);

async function boot(): Promise<void> {
  buildPalette();
  selectTool("wheel-front-left");
  if (await client.health()) {
    const priors = await client.listPriors();
    for (const cls of priors.classes) {
      const opt = document.createElement("option");
      opt.value = cls.name;
      opt.textContent = `${cls.name} (${cls.mu.map((v) => v.toFixed(1)).join("×")} m)`;
      classPicker.appendChild(opt);
    }
    statusLine.textContent = `connected to ${client.baseUrl}`;
  } else {
    statusLine.textContent = `service unreachable at ${client.baseUrl} — start: cuboidfit serve`;
  }
  render();
}

void boot();
