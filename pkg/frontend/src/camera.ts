/** Orbit camera producing the same world-from-camera pose as the service's
 * training cameras: +z points from the eye toward the target, y is down
 * (image convention), pose serialized as a row-major 3x4 array. */

export interface OrbitState {
  azimuth: number;
  elevation: number;
  distance: number;
  target: [number, number, number];
}

export interface CameraIntrinsics {
  width: number;
  height: number;
  fx: number;
  fy: number;
  cx: number;
  cy: number;
}

export interface CameraPose extends CameraIntrinsics {
  /** Row-major 3x4 [R | t], world-from-camera. */
  pose: number[];
}

type Vec3 = [number, number, number];

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

/** World-from-camera rotation columns (right, down, forward) and eye. */
export function lookAt(
  eye: Vec3,
  target: Vec3,
  up: Vec3 = [0, -1, 0],
): { rotation: [Vec3, Vec3, Vec3]; translation: Vec3 } {
  let fwd = sub(target, eye);
  const n = norm(fwd);
  if (n === 0) {
    throw new Error("eye and target coincide");
  }
  fwd = scale(fwd, 1 / n);
  let right = cross(up, fwd);
  let rn = norm(right);
  if (rn < 1e-9) {
    right = cross([1, 0, 0], fwd);
    rn = norm(right);
  }
  right = scale(right, 1 / rn);
  const down = cross(fwd, right);
  return { rotation: [right, down, fwd], translation: eye };
}

/** Default field-of-view scale matching the dataset cameras. */
export const FOV_SCALE = 1.2;

export function orbitEye(state: OrbitState): Vec3 {
  const { azimuth, elevation, distance, target } = state;
  return [
    target[0] + distance * Math.cos(elevation) * Math.cos(azimuth),
    target[1] + distance * Math.sin(elevation),
    target[2] + distance * Math.cos(elevation) * Math.sin(azimuth),
  ];
}

/** Full camera for a /render request body. */
export function orbitCamera(
  state: OrbitState,
  width: number,
  height: number,
  fovScale: number = FOV_SCALE,
): CameraPose {
  const { rotation, translation } = lookAt(orbitEye(state), state.target);
  // rotation holds camera-axis columns; emit row-major [R | t]
  const [right, down, fwd] = rotation;
  const pose = [
    right[0], down[0], fwd[0], translation[0],
    right[1], down[1], fwd[1], translation[1],
    right[2], down[2], fwd[2], translation[2],
  ];
  const f = fovScale * Math.max(width, height);
  return { pose, width, height, fx: f, fy: f, cx: width / 2, cy: height / 2 };
}
