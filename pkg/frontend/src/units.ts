/** Display-unit conversion. Radians on the wire, degrees in front of humans;
 * translation ranges stay in normalized units in both places. */

export function degToRad(deg: number): number {
  return (deg * Math.PI) / 180;
}

export function radToDeg(rad: number): number {
  return (rad * 180) / Math.PI;
}

/** Rotation kinds edit their range in degrees; prismatic in normalized units. */
export function rangeUsesDegrees(kind: string): boolean {
  return kind === 'C' || kind === 'CB';
}

export function formatScaleCm(scale: [number, number, number]): string {
  return scale.map((v) => v.toFixed(1)).join(' x ') + ' cm';
}
