Page({
  onShow() {
    wx.getClipboardData({ success: (r) => this.parse(r.data) });
    const map = wx.createMapContext('m');
    map.moveToLocation();
  },
});
