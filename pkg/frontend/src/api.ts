// Typed client for the game service JSON API. The client never computes
// game math; every displayed number comes back from the server.

export interface OccupantView {
    occupant: string;
    day: string;
    present: boolean;
    standing_vote: number | null;
    default_level: number;
    implemented: number;
    points: number;
}

export interface ParticipantEntry {
    vote: number;
    is_default: boolean;
}

export interface StateResponse {
    day: string;
    default_level: number;
    round_cutoff: string;
    implemented: number;
    participants: Record<string, ParticipantEntry>;
}

export interface PointsResponse {
    points: Record<string, number>;
}

export interface AwardResponse {
    day: string;
    increments: Record<string, number>;
}

export interface LotteryResponse {
    winners: string[];
    reset: boolean;
}

export class ApiError extends Error {
    status: number;
    detail: string;

    constructor(status: number, detail: string) {
        super(`${status}: ${detail}`);
        this.status = status;
        this.detail = detail;
    }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class Client {
    private fetchImpl: FetchLike;
    base: string;

    constructor(fetchImpl?: FetchLike, base = "") {
        this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
        this.base = base;
    }

    private async request<T>(path: string, token: string, init: RequestInit = {}): Promise<T> {
        const headers: Record<string, string> = { "X-Auth-Token": token };
        if (init.body !== undefined) headers["Content-Type"] = "application/json";
        const resp = await this.fetchImpl(this.base + path, { ...init, headers });
        if (!resp.ok) {
            let detail = resp.statusText;
            try {
                const body = await resp.json();
                if (body && typeof body.detail === "string") detail = body.detail;
            } catch {
                // non-JSON error body, keep the status text
            }
            throw new ApiError(resp.status, detail);
        }
        return resp.json() as Promise<T>;
    }

    login(token: string): Promise<OccupantView> {
        return this.request("/login", token, { method: "POST" });
    }

    vote(token: string, value: number): Promise<OccupantView> {
        return this.request("/vote", token, { method: "POST", body: JSON.stringify({ value }) });
    }

    state(token: string): Promise<StateResponse> {
        return this.request("/state", token);
    }

    points(token: string): Promise<PointsResponse> {
        return this.request("/points", token);
    }

    setDefault(token: string, level: number): Promise<{ default_level: number }> {
        return this.request("/admin/default", token, { method: "POST", body: JSON.stringify({ level }) });
    }

    award(token: string, day?: string): Promise<AwardResponse> {
        const body = day ? { day } : {};
        return this.request("/admin/award", token, { method: "POST", body: JSON.stringify(body) });
    }

    lottery(token: string, seed: number): Promise<LotteryResponse> {
        return this.request("/admin/lottery", token, { method: "POST", body: JSON.stringify({ seed }) });
    }
}
