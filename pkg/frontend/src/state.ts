/** Viewer state: orbit camera, active policy, download prefix, last-frame
 * stats. Policy validation mirrors the service so bad requests are caught
 * before they leave the browser. */

import type { Policy } from "./api.js";
import type { OrbitState } from "./camera.js";

export interface FrameStats {
  totalMs: number;
  networkMs: number;
  networkMacs: number;
  occupancyMacs: number;
}

export interface ViewerState {
  orbit: OrbitState;
  policy: Policy;
  numLods: number;
  /** Downloaded chunks always form the prefix {1..downloadedPrefix}. */
  downloadedPrefix: number;
  /** When set, never render above the downloaded prefix. */
  offlinePrefixMode: boolean;
  lastFrame: FrameStats | null;
}

export function initialState(numLods: number): ViewerState {
  return {
    orbit: { azimuth: 0.7, elevation: 0.3, distance: 1.5, target: [0, 0, 0] },
    policy: { mode: "fixed", k: numLods },
    numLods,
    downloadedPrefix: 0,
    offlinePrefixMode: false,
    lastFrame: null,
  };
}

export function validatePolicy(policy: Policy, numLods: number): string | null {
  const inRange = (k: number | undefined) =>
    k === undefined || (Number.isInteger(k) && k >= 1 && k <= numLods);
  switch (policy.mode) {
    case "fixed":
      if (!inRange(policy.k)) return `LOD k must be in [1, ${numLods}]`;
      return null;
    case "dithered":
      if (!inRange(policy.from_k) || !inRange(policy.to_k)) {
        return `LODs must be in [1, ${numLods}]`;
      }
      if (
        policy.fraction !== undefined &&
        (policy.fraction < 0 || policy.fraction > 1)
      ) {
        return "fraction must be in [0, 1]";
      }
      return null;
    case "foveated": {
      const radii = policy.radii ?? [];
      if (radii.length !== numLods - 1) {
        return `foveation needs ${numLods - 1} radii`;
      }
      for (let i = 1; i < radii.length; i++) {
        const prev = radii[i - 1];
        const cur = radii[i];
        if (prev !== undefined && cur !== undefined && cur <= prev) {
          return "radii must be strictly increasing";
        }
      }
      return null;
    }
    case "distance":
      if (policy.distance_radius !== undefined && policy.distance_radius <= 0) {
        return "distance_radius must be positive";
      }
      return null;
    default:
      return `unknown policy mode ${(policy as Policy).mode}`;
  }
}

/** Highest LOD the policy may touch; used for the offline-prefix guard. */
export function policyMaxLod(policy: Policy, numLods: number): number {
  switch (policy.mode) {
    case "fixed":
      return policy.k ?? numLods;
    case "dithered":
      return Math.max(policy.from_k ?? 1, policy.to_k ?? numLods);
    default:
      // distance/foveated policies may select any LOD per pixel
      return numLods;
  }
}

/** Clamp a policy so it never exceeds the downloaded prefix. */
export function clampPolicyToPrefix(policy: Policy, prefixLod: number): Policy {
  const cap = (k: number | undefined, fallback: number) =>
    Math.min(k ?? fallback, Math.max(prefixLod, 1));
  switch (policy.mode) {
    case "fixed":
      return { ...policy, k: cap(policy.k, 4) };
    case "dithered":
      return {
        ...policy,
        from_k: cap(policy.from_k, 1),
        to_k: cap(policy.to_k, 4),
      };
    default:
      // per-pixel policies fall back to a fixed render at the prefix LOD
      return { mode: "fixed", k: Math.max(prefixLod, 1) };
  }
}
