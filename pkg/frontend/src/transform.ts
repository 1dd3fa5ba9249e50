/**
 * World <-> screen view transform: uniform scale, pan, y-axis flip.
 * Kept separate from rendering so the round-trip contract is testable.
 */

export class ViewTransform {
  scale: number; // pixels per meter
  centerX: number; // world point at the canvas center
  centerY: number;
  canvasWidth: number;
  canvasHeight: number;

  constructor(canvasWidth: number, canvasHeight: number, scale = 60,
              centerX = 5, centerY = 5) {
    this.canvasWidth = canvasWidth;
    this.canvasHeight = canvasHeight;
    this.scale = scale;
    this.centerX = centerX;
    this.centerY = centerY;
  }

  worldToScreen(x: number, y: number): [number, number] {
    return [
      this.canvasWidth / 2 + (x - this.centerX) * this.scale,
      this.canvasHeight / 2 - (y - this.centerY) * this.scale,
    ];
  }

  screenToWorld(px: number, py: number): [number, number] {
    return [
      this.centerX + (px - this.canvasWidth / 2) / this.scale,
      this.centerY - (py - this.canvasHeight / 2) / this.scale,
    ];
  }

  /** Pan by a screen-space delta (e.g. mouse drag). */
  pan(dxPixels: number, dyPixels: number): void {
    this.centerX -= dxPixels / this.scale;
    this.centerY += dyPixels / this.scale;
  }

  /** Zoom by a factor keeping the world point under the cursor fixed. */
  zoomAt(px: number, py: number, factor: number): void {
    const [wx, wy] = this.screenToWorld(px, py);
    this.scale = Math.min(Math.max(this.scale * factor, 5), 2000);
    const [nx, ny] = this.screenToWorld(px, py);
    this.centerX += wx - nx;
    this.centerY += wy - ny;
  }

  /** Fit a world-axis-aligned box with a small margin. */
  fit(xmin: number, ymin: number, xmax: number, ymax: number): void {
    const margin = 1.08;
    this.centerX = (xmin + xmax) / 2;
    this.centerY = (ymin + ymax) / 2;
    this.scale = Math.min(
      this.canvasWidth / ((xmax - xmin) * margin),
      this.canvasHeight / ((ymax - ymin) * margin),
    );
  }
}
