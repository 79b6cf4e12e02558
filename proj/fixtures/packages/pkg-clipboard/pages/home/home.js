Page({
  onShow() {
    wx.getClipboardData({
      success(res) {
        if (/^\d{6}$/.test(res.data)) console.log('coupon', res.data);
      },
    });
  },
});
