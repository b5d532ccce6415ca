// Leaderboard rows from the latest /points and /state responses: points
// descending, ties broken by occupant id so the order is stable.

import { PointsResponse, StateResponse } from "./api";

export interface LeaderboardRow {
    occupant: string;
    points: number;
    lastVote: number | null;
    isDefault: boolean;
}

export function leaderboardRows(
    points: PointsResponse | null,
    state: StateResponse | null,
): LeaderboardRow[] {
    if (!points) return [];
    const rows = Object.keys(points.points).map((occupant) => {
        const entry = state?.participants[occupant];
        return {
            occupant,
            points: points.points[occupant],
            lastVote: entry ? entry.vote : null,
            isDefault: entry ? entry.is_default : false,
        };
    });
    rows.sort((a, b) => b.points - a.points || (a.occupant < b.occupant ? -1 : 1));
    return rows;
}

export function renderLeaderboard(table: HTMLElement, rows: LeaderboardRow[], stale: boolean): void {
    if (rows.length === 0) {
        table.innerHTML = '<tr><td class="empty" colspan="4">nobody is playing yet</td></tr>';
        return;
    }
    const body = rows
        .map((row, i) => {
            const vote =
                row.lastVote === null
                    ? "&ndash;"
                    : row.lastVote.toFixed(1) + (row.isDefault ? " (default)" : "");
            return (
                `<tr><td>${i + 1}</td><td>${row.occupant}</td>` +
                `<td>${row.points.toFixed(1)}</td><td>${vote}</td></tr>`
            );
        })
        .join("");
    table.innerHTML =
        "<tr><th>#</th><th>occupant</th><th>points</th><th>last vote</th></tr>" +
        body +
        (stale ? '<tr><td class="stale" colspan="4">showing last known data</td></tr>' : "");
}
