// View model fed exclusively by successful server responses. Concurrent
// responses resolve last-write-wins; a failed poll flips the connection
// status but keeps the last good data on screen.

import { OccupantView, PointsResponse, StateResponse } from "./api";

export type ConnectionStatus = "idle" | "connected" | "offline";

export interface ViewModel {
    me: string | null;
    myVote: number | null;
    myPoints: number;
    implemented: number | null;
    defaultLevel: number | null;
    status: ConnectionStatus;
    stale: boolean;
    lastState: StateResponse | null;
    lastPoints: PointsResponse | null;
}

export function emptyModel(): ViewModel {
    return {
        me: null,
        myVote: null,
        myPoints: 0,
        implemented: null,
        defaultLevel: null,
        status: "idle",
        stale: false,
        lastState: null,
        lastPoints: null,
    };
}

export function applyOccupantView(vm: ViewModel, view: OccupantView): void {
    vm.me = view.occupant;
    vm.myVote = view.standing_vote;
    vm.myPoints = view.points;
    vm.implemented = view.implemented;
    vm.defaultLevel = view.default_level;
    vm.status = "connected";
    vm.stale = false;
}

export function applyState(vm: ViewModel, state: StateResponse): void {
    vm.lastState = state;
    vm.implemented = state.implemented;
    vm.defaultLevel = state.default_level;
    if (vm.me && state.participants[vm.me]) {
        vm.myVote = state.participants[vm.me].vote;
    }
    vm.status = "connected";
    vm.stale = false;
}

export function applyPoints(vm: ViewModel, points: PointsResponse): void {
    vm.lastPoints = points;
    if (vm.me && vm.me in points.points) {
        vm.myPoints = points.points[vm.me];
    }
    vm.status = "connected";
    vm.stale = false;
}

export function markOffline(vm: ViewModel): void {
    vm.status = "offline";
    vm.stale = vm.lastState !== null || vm.lastPoints !== null;
}

// Slider values live on the server's 0..100 scale; anything the DOM hands
// us outside that is clamped before display, never before submission (the
// server is the validator of record).
export function clampLevel(value: number): number {
    if (!Number.isFinite(value)) return 0;
    return Math.min(100, Math.max(0, value));
}
