import { describe, expect, it } from "vitest";

import { StateResponse } from "../src/api";
import { leaderboardRows, renderLeaderboard } from "../src/leaderboard";

const state: StateResponse = {
    day: "2024-03-04",
    default_level: 60,
    round_cutoff: "23:59",
    implemented: 50,
    participants: {
        ana: { vote: 40, is_default: false },
        raj: { vote: 60, is_default: true },
    },
};

describe("leaderboard rows", () => {
    it("sorts by points descending", () => {
        const rows = leaderboardRows({ points: { ana: 10, raj: 20 } }, state);
        expect(rows.map((r) => r.occupant)).toEqual(["raj", "ana"]);
    });

    it("breaks ties by occupant id", () => {
        const rows = leaderboardRows({ points: { tom: 5, ana: 5, raj: 5 } }, null);
        expect(rows.map((r) => r.occupant)).toEqual(["ana", "raj", "tom"]);
    });

    it("shows the last vote for participants and none for the absent", () => {
        const rows = leaderboardRows({ points: { ana: 0, raj: 0, tom: 0 } }, state);
        const byId = Object.fromEntries(rows.map((r) => [r.occupant, r]));
        expect(byId.ana.lastVote).toBe(40);
        expect(byId.ana.isDefault).toBe(false);
        expect(byId.raj.lastVote).toBe(60);
        expect(byId.raj.isDefault).toBe(true);
        expect(byId.tom.lastVote).toBeNull();
    });

    it("is empty without a points response", () => {
        expect(leaderboardRows(null, state)).toEqual([]);
    });
});

describe("leaderboard rendering", () => {
    it("renders ranked rows with a default marker", () => {
        const table = document.createElement("tbody");
        renderLeaderboard(table, leaderboardRows({ points: { ana: 10, raj: 20 } }, state), false);
        const cells = [...table.querySelectorAll("tr")].map((tr) => tr.textContent);
        expect(cells[0]).toContain("points");
        expect(cells[1]).toContain("raj");
        expect(cells[1]).toContain("60.0 (default)");
        expect(cells[2]).toContain("ana");
        expect(table.textContent).not.toContain("last known");
    });

    it("shows an empty-state message for an empty game", () => {
        const table = document.createElement("tbody");
        renderLeaderboard(table, [], false);
        expect(table.textContent).toContain("nobody is playing yet");
    });

    it("appends a stale badge when offline", () => {
        const table = document.createElement("tbody");
        renderLeaderboard(table, leaderboardRows({ points: { ana: 1 } }, null), true);
        expect(table.textContent).toContain("ana");
        expect(table.textContent).toContain("showing last known data");
    });
});
