// Page wiring. Everything on screen is a re-render of the view model, and
// the view model only changes when a server call succeeds or fails.

import { ApiError, Client } from "./api";
import { leaderboardRows, renderLeaderboard } from "./leaderboard";
import {
    ViewModel,
    applyOccupantView,
    applyPoints,
    applyState,
    emptyModel,
    markOffline,
} from "./state";

export const POLL_MS = 5000;

export interface AppHandles {
    model: ViewModel;
    tick(): Promise<void>;
    submitVote(value: number): Promise<void>;
}

function el<T extends HTMLElement>(doc: Document, id: string): T {
    const node = doc.getElementById(id);
    if (!node) throw new Error(`missing #${id}`);
    return node as T;
}

export function setup(doc: Document, client: Client): AppHandles {
    const vm = emptyModel();
    let token = "";
    let adminToken = "";

    const loginPanel = el(doc, "login-panel");
    const tokenInput = el<HTMLInputElement>(doc, "token");
    const loginBtn = el<HTMLButtonElement>(doc, "login-btn");
    const loginError = el(doc, "login-error");

    const gamePanel = el(doc, "game-panel");
    const statusBadge = el(doc, "status");
    const whoami = el(doc, "whoami");
    const implementedOut = el(doc, "implemented");
    const defaultOut = el(doc, "default-level");
    const myVoteOut = el(doc, "my-vote");
    const myPointsOut = el(doc, "my-points");
    const slider = el<HTMLInputElement>(doc, "vote-slider");
    const sliderValue = el(doc, "vote-value");
    const voteBtn = el<HTMLButtonElement>(doc, "vote-submit");
    const voteError = el(doc, "vote-error");
    const board = el(doc, "leaderboard");

    const adminTokenInput = el<HTMLInputElement>(doc, "admin-token");
    const defaultInput = el<HTMLInputElement>(doc, "default-input");
    const defaultBtn = el<HTMLButtonElement>(doc, "default-btn");
    const awardBtn = el<HTMLButtonElement>(doc, "award-btn");
    const lotterySeed = el<HTMLInputElement>(doc, "lottery-seed");
    const lotteryBtn = el<HTMLButtonElement>(doc, "lottery-btn");
    const adminMsg = el(doc, "admin-msg");

    function fmt(value: number | null): string {
        return value === null ? "–" : value.toFixed(1);
    }

    function render(): void {
        statusBadge.textContent = vm.status;
        statusBadge.className = "badge " + vm.status;
        whoami.textContent = vm.me ?? "";
        implementedOut.textContent = fmt(vm.implemented);
        defaultOut.textContent = fmt(vm.defaultLevel);
        myVoteOut.textContent = fmt(vm.myVote);
        myPointsOut.textContent = vm.myPoints.toFixed(1);
        voteBtn.disabled = vm.status === "offline";
        renderLeaderboard(board, leaderboardRows(vm.lastPoints, vm.lastState), vm.stale);
    }

    async function tick(): Promise<void> {
        if (!token) return;
        try {
            const [state, points] = await Promise.all([client.state(token), client.points(token)]);
            applyState(vm, state);
            applyPoints(vm, points);
        } catch {
            markOffline(vm);
        }
        render();
    }

    async function submitVote(value: number): Promise<void> {
        voteError.textContent = "";
        try {
            const view = await client.vote(token, value);
            applyOccupantView(vm, view);
        } catch (err) {
            if (err instanceof ApiError) {
                voteError.textContent = err.detail;
            } else {
                markOffline(vm);
            }
        }
        render();
        await tick();
    }

    loginBtn.addEventListener("click", async () => {
        loginError.textContent = "";
        const candidate = tokenInput.value.trim();
        try {
            const view = await client.login(candidate);
            token = candidate;
            applyOccupantView(vm, view);
            slider.value = String(Math.round(view.standing_vote ?? view.default_level));
            sliderValue.textContent = slider.value;
            loginPanel.hidden = true;
            gamePanel.hidden = false;
        } catch (err) {
            loginError.textContent = err instanceof ApiError ? err.detail : "service unreachable";
            return;
        }
        render();
        await tick();
    });

    slider.addEventListener("input", () => {
        sliderValue.textContent = slider.value;
    });

    voteBtn.addEventListener("click", () => submitVote(Number(slider.value)));

    function adminAction(run: (tok: string) => Promise<string>): () => Promise<void> {
        return async () => {
            adminMsg.textContent = "";
            adminToken = adminTokenInput.value.trim();
            try {
                adminMsg.textContent = await run(adminToken);
            } catch (err) {
                adminMsg.textContent = err instanceof ApiError ? err.detail : "service unreachable";
            }
            await tick();
        };
    }

    defaultBtn.addEventListener(
        "click",
        adminAction(async (tok) => {
            const reply = await client.setDefault(tok, Number(defaultInput.value));
            return `default set to ${reply.default_level.toFixed(1)}`;
        }),
    );

    awardBtn.addEventListener(
        "click",
        adminAction(async (tok) => {
            const reply = await client.award(tok);
            const total = Object.values(reply.increments).reduce((a, b) => a + b, 0);
            return `awarded ${total.toFixed(1)} points for ${reply.day}`;
        }),
    );

    lotteryBtn.addEventListener(
        "click",
        adminAction(async (tok) => {
            const reply = await client.lottery(tok, Number(lotterySeed.value));
            return `winners: ${reply.winners.join(", ")}`;
        }),
    );

    render();
    return { model: vm, tick, submitVote };
}
