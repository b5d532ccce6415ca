import { describe, expect, it } from "vitest";

import { ApiError, Client, FetchLike } from "../src/api";
import { FakeService } from "./fake_service";

function service(): FakeService {
    return new FakeService({
        occupants: { ana: "tok-ana", raj: "tok-raj" },
        adminToken: "tok-admin",
        defaultLevel: 60,
    });
}

describe("client", () => {
    it("logs in and gets the occupant view", async () => {
        const client = new Client(service().fetch);
        const view = await client.login("tok-ana");
        expect(view.occupant).toBe("ana");
        expect(view.present).toBe(true);
        expect(view.standing_vote).toBe(60);
        expect(view.implemented).toBe(60);
    });

    it("sends the auth header and a JSON vote body", async () => {
        const seen: { url: string; init: RequestInit }[] = [];
        const svc = service();
        const recording: FetchLike = (url, init) => {
            seen.push({ url, init: init ?? {} });
            return svc.fetch(url, init);
        };
        const client = new Client(recording);
        await client.login("tok-ana");
        await client.vote("tok-ana", 42);
        const voteCall = seen[1];
        expect(voteCall.url).toBe("/vote");
        const headers = voteCall.init.headers as Record<string, string>;
        expect(headers["X-Auth-Token"]).toBe("tok-ana");
        expect(headers["Content-Type"]).toBe("application/json");
        expect(JSON.parse(String(voteCall.init.body))).toEqual({ value: 42 });
    });

    it("surfaces server rejections with status and detail", async () => {
        const client = new Client(service().fetch);
        await expect(client.login("nope")).rejects.toMatchObject({
            status: 401,
            detail: "unknown token",
        });
        await expect(client.vote("tok-ana", 40)).rejects.toMatchObject({ status: 409 });
        await expect(client.setDefault("tok-ana", 30)).rejects.toMatchObject({
            status: 403,
            detail: "admin token required",
        });
    });

    it("falls back to the status text on a non-JSON error body", async () => {
        const broken: FetchLike = async () =>
            new Response("boom", { status: 500, statusText: "Internal Server Error" });
        const client = new Client(broken);
        const err = await client.state("tok-ana").catch((e) => e);
        expect(err).toBeInstanceOf(ApiError);
        expect(err.detail).toBe("Internal Server Error");
    });

    it("drives the admin endpoints", async () => {
        const svc = service();
        const client = new Client(svc.fetch);
        await client.login("tok-ana");
        await client.vote("tok-ana", 40);
        expect((await client.setDefault("tok-admin", 30)).default_level).toBe(30);
        const award = await client.award("tok-admin");
        expect(award.increments).toEqual({ ana: 100 });
        const draw = await client.lottery("tok-admin", 7);
        expect(draw.winners).toEqual(["ana"]);
        expect(draw.reset).toBe(true);
        const again = await client.award("tok-admin").catch((e) => e);
        expect(again.detail).toContain("already awarded");
    });
});
